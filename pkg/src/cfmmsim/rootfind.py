"""Safeguarded scalar root finding."""

from __future__ import annotations

import math
from typing import Callable

from .errors import NoBracket, SolverNoConverge

MAX_ITER = 200


def bracketed_root_solve(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    rel_tol: float = 1e-12,
    ftol: float = 0.0,
    max_iter: int = MAX_ITER,
    abs_tol: float = 0.0,
) -> float:
    """Root of a continuous monotone ``f`` on ``[lo, hi]``.

    Bisection refined by secant (regula falsi, Illinois variant) steps. A
    secant candidate is only accepted if it falls strictly inside the
    current bracket and shrinks it by at least half every other step;
    otherwise the midpoint is used.

    Stops when ``|f(x)| <= ftol`` or the bracket is narrower than
    ``rel_tol * max(|lo|, |hi|)`` (or ``abs_tol``, or a few ulps, whichever
    is larger). Pass ``abs_tol`` when the root may sit at zero.
    """
    if lo > hi:
        lo, hi = hi, lo
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if math.isnan(flo) or math.isnan(fhi) or (flo > 0) == (fhi > 0):
        raise NoBracket(f"f({lo!r})={flo!r} and f({hi!r})={fhi!r} share a sign")

    side = 0
    prev_width = hi - lo
    force_bisect = False
    for _ in range(max_iter):
        scale = max(abs(lo), abs(hi))
        if hi - lo <= max(rel_tol * scale, abs_tol, 4.0 * math.ulp(scale)):
            return lo if abs(f(lo)) < abs(f(hi)) else hi

        x = (lo * fhi - hi * flo) / (fhi - flo)
        if force_bisect or not (lo < x < hi):
            x = lo + 0.5 * (hi - lo)
        fx = f(x)
        if math.isnan(fx):
            raise SolverNoConverge(f"f({x!r}) is NaN")
        if fx == 0.0 or abs(fx) <= ftol:
            return x
        if (fx > 0) == (fhi > 0):
            hi, fhi = x, fx
            if side == -1:
                flo *= 0.5
            side = -1
        else:
            lo, flo = x, fx
            if side == 1:
                fhi *= 0.5
            side = 1
        # secant stalled on one side: the next step bisects
        force_bisect = (hi - lo) > 0.5 * prev_width
        prev_width = hi - lo
    raise SolverNoConverge(f"no convergence in {max_iter} iterations on [{lo}, {hi}]")
