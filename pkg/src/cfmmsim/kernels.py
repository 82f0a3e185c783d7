"""Kernel backend selection.

The compiled extension is used when it was built; set
``CFMMSIM_PURE_PYTHON=1`` to force the pure-Python implementation.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("CFMMSIM_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

OK = _kernels_py.OK
EXHAUSTED = _kernels_py.EXHAUSTED
tick_walk = _impl.tick_walk
cmmm_profit_margin = _impl.cmmm_profit_margin


def available_backends() -> dict:
    """Every importable backend, keyed by name."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels

        out["cython"] = _kernels
    except ImportError:
        pass
    return out
