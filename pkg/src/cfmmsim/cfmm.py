"""Constant-function market makers.

A :class:`CfmmSpec` describes an invariant ``F(q; zeta) = K``. Constant
product and constant mean invariants use closed forms; custom invariants
fall back to bracketed root solving and finite differences.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

from .core import Vector, check_index, vadd
from .errors import (
    DimensionMismatch,
    InsolventTrade,
    NonConvexInvariant,
    NonPositiveQuantity,
    NoBracket,
    SolverNoConverge,
)
from .rootfind import bracketed_root_solve

CONSTANT_PRODUCT = "constant_product"
CONSTANT_MEAN = "constant_mean"
CUSTOM = "custom"

CONSERVATION_TOL = 1e-12
FD_REL_STEP = 1e-7
CONVEXITY_SAMPLES = 100


@dataclass(frozen=True)
class CfmmSpec:
    kind: str
    n_assets: int
    weights: Optional[tuple] = None
    evaluator: Optional[Callable[[Sequence[float]], float]] = field(
        default=None, compare=False
    )

    @classmethod
    def constant_product(cls) -> "CfmmSpec":
        return cls(CONSTANT_PRODUCT, 2)

    @classmethod
    def constant_mean(cls, weights: Sequence[float]) -> "CfmmSpec":
        w = tuple(float(x) for x in weights)
        if len(w) < 2:
            raise DimensionMismatch("a constant mean pool needs at least two assets")
        if any(not (0.0 < x < 1.0) for x in w):
            raise ValueError(f"weights must lie in (0, 1): {w}")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {math.fsum(w)!r}")
        return cls(CONSTANT_MEAN, len(w), w)

    @classmethod
    def custom(
        cls,
        evaluator: Callable[[Sequence[float]], float],
        n_assets: int,
        check: bool = True,
    ) -> "CfmmSpec":
        spec = cls(CUSTOM, n_assets, None, evaluator)
        if check:
            check_convexity(spec)
        return spec

    def as_dict(self) -> dict:
        out = {"kind": self.kind, "n_assets": self.n_assets}
        if self.weights is not None:
            out["weights"] = list(self.weights)
        return out


def check_convexity(spec: CfmmSpec, samples: int = CONVEXITY_SAMPLES, seed: int = 0):
    """Spot-check monotonicity and level-set convexity of a custom invariant.

    Points are drawn log-uniformly from [1e-2, 1e2]^N. Monotone: raising
    any coordinate never lowers F. Convex level sets: F at the midpoint of
    two points is at least the smaller of their values (quasi-concavity).
    """
    rng = random.Random(seed)
    n = spec.n_assets

    def draw():
        return [10.0 ** rng.uniform(-2, 2) for _ in range(n)]

    for _ in range(samples):
        a, b = draw(), draw()
        fa, fb = spec.evaluator(a), spec.evaluator(b)
        for i in range(n):
            bumped = list(a)
            bumped[i] *= 1.001
            if spec.evaluator(bumped) < fa * (1 - 1e-12):
                raise NonConvexInvariant(f"F decreases in asset {i + 1} near {a}")
        mid = [(x + y) / 2 for x, y in zip(a, b)]
        if spec.evaluator(mid) < min(fa, fb) * (1 - 1e-12):
            raise NonConvexInvariant(f"level sets are not convex between {a} and {b}")


def _check_positive(q: Sequence[float]):
    for i, x in enumerate(q):
        if not x > 0:
            raise NonPositiveQuantity(f"asset {i + 1} quantity {x!r} is not positive")


def invariant(spec: CfmmSpec, q: Sequence[float]) -> float:
    """Depth ``K = F(q)``."""
    if len(q) != spec.n_assets:
        raise DimensionMismatch(f"{len(q)} quantities for a {spec.n_assets}-asset spec")
    _check_positive(q)
    if spec.kind == CONSTANT_PRODUCT:
        return q[0] * q[1]
    if spec.kind == CONSTANT_MEAN:
        return math.exp(math.fsum(w * math.log(x) for w, x in zip(spec.weights, q)))
    return float(spec.evaluator(q))


def spot_price(spec: CfmmSpec, q: Sequence[float], i: int, j: int) -> float:
    """Instantaneous price of asset ``i`` in units of asset ``j``."""
    n = spec.n_assets
    check_index(i, n)
    check_index(j, n)
    if i == j:
        return 1.0
    _check_positive(q)
    if spec.kind == CONSTANT_PRODUCT:
        return q[j - 1] / q[i - 1]
    if spec.kind == CONSTANT_MEAN:
        w = spec.weights
        return (q[j - 1] * w[i - 1]) / (q[i - 1] * w[j - 1])
    # central difference along the level set, moving only q_i and q_j
    h = FD_REL_STEP * q[i - 1]
    up = solve_trade(spec, q, {i: h}, j)
    down = solve_trade(spec, q, {i: -h}, j)
    return -(up - down) / (2 * h)


def price_matrix(spec: CfmmSpec, q: Sequence[float]) -> tuple:
    """Row ``i`` holds ``Z[i][j]``, asset ``i`` priced in asset ``j`` (0-based)."""
    n = spec.n_assets
    if spec.kind == CUSTOM:
        # one numeric column, the rest follows from Z_ij = Z_in / Z_jn
        col = [spot_price(spec, q, i, n) for i in range(1, n + 1)]
        return tuple(tuple(1.0 if a == b else col[a] / col[b] for b in range(n))
                     for a in range(n))
    return tuple(
        tuple(spot_price(spec, q, a + 1, b + 1) for b in range(n)) for a in range(n)
    )


def _given_map(given, n: int, k: int) -> dict:
    if isinstance(given, Mapping):
        items = {int(i): float(d) for i, d in given.items() if int(i) != k}
    else:
        if len(given) != n:
            raise DimensionMismatch(f"{len(given)} legs for a {n}-asset spec")
        items = {i + 1: float(d) for i, d in enumerate(given)
                 if i + 1 != k and d is not None}
    for i in items:
        check_index(i, n)
    return items


def solve_reserve(spec: CfmmSpec, q: Sequence[float], given, k: int) -> float:
    """New quantity ``q_k + dq_k`` of the solved asset, keeping ``F`` fixed.

    Computed directly rather than as a difference so that a nearly drained
    reserve keeps its relative precision.
    """
    n = spec.n_assets
    check_index(k, n)
    _check_positive(q)
    legs = _given_map(given, n, k)
    for i, d in legs.items():
        if not q[i - 1] + d > 0:
            raise InsolventTrade(f"leg {i} would drain asset {i} ({q[i - 1]} + {d})")
    qk = q[k - 1]
    if all(d == 0 for d in legs.values()):
        return qk

    if spec.kind == CONSTANT_PRODUCT:
        (i, d), = legs.items()
        return qk * (q[i - 1] / (q[i - 1] + d))
    if spec.kind == CONSTANT_MEAN:
        w = spec.weights
        wk = w[k - 1]
        # q_k' / q_k = prod_i (q_i / (q_i + d_i))^(w_i / w_k)
        log_ratio = -math.fsum(
            (w[i - 1] / wk) * math.log1p(d / q[i - 1]) for i, d in legs.items()
        )
        return qk * math.exp(log_ratio)
    return _solve_trade_numeric(spec, q, legs, k) + qk


def solve_trade(spec: CfmmSpec, q: Sequence[float], given, k: int) -> float:
    """Solve for ``dq_k`` such that ``F(q + dq) = F(q)``.

    ``given`` is either a mapping of 1-based index to delta or a full-length
    vector whose ``k``-th entry is ignored (may be ``None``).
    """
    n = spec.n_assets
    check_index(k, n)
    _check_positive(q)
    legs = _given_map(given, n, k)
    for i, d in legs.items():
        if not q[i - 1] + d > 0:
            raise InsolventTrade(f"leg {i} would drain asset {i} ({q[i - 1]} + {d})")
    qk = q[k - 1]
    if all(d == 0 for d in legs.values()):
        return 0.0

    if spec.kind == CONSTANT_PRODUCT:
        (i, d), = legs.items()
        return -qk * d / (q[i - 1] + d)
    if spec.kind == CONSTANT_MEAN:
        w = spec.weights
        wk = w[k - 1]
        log_ratio = -math.fsum(
            (w[i - 1] / wk) * math.log1p(d / q[i - 1]) for i, d in legs.items()
        )
        return qk * math.expm1(log_ratio)
    return _solve_trade_numeric(spec, q, legs, k)


def _solve_trade_numeric(spec, q, legs, k) -> float:
    base = list(q)
    for i, d in legs.items():
        base[i - 1] += d
    target = invariant(spec, q)

    def g(x):
        trial = list(base)
        trial[k - 1] = x
        return spec.evaluator(trial) / target - 1.0

    qk = q[k - 1]
    lo = qk * 1e-12
    if g(lo) > 0:
        raise InsolventTrade("no positive quantity of the solved asset restores F")
    hi = max(qk, 1.0)
    for _ in range(200):
        if g(hi) > 0:
            break
        hi *= 2.0
    else:
        raise InsolventTrade("the solved asset would need an unbounded quantity")
    try:
        x = bracketed_root_solve(g, lo, hi, rel_tol=1e-16, ftol=1e-15)
    except NoBracket as exc:  # pragma: no cover - guarded above
        raise SolverNoConverge(str(exc)) from exc
    return x - qk


def depth_after_quote(spec: CfmmSpec, q: Sequence[float], deltas: Sequence[float]) -> float:
    """Depth ``K_Y = F(q + dq)`` after a liquidity event."""
    return invariant(spec, vadd(q, deltas))


def apply_deltas(q: Sequence[float], deltas: Sequence[float]) -> Vector:
    return vadd(q, deltas)
