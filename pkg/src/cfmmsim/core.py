"""Domain types shared by the pool modules.

Vectors are plain tuples of floats. Asset indices are 1-based everywhere in
the public API; serialized arrays are 0-based, so asset ``i`` lives at
position ``i - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import (
    AllZeroTrade,
    BadSolveIndex,
    DimensionMismatch,
    DisproportionateQuote,
    MixedSigns,
    NonFiniteValue,
    NonPositiveQuantity,
    ZeroValuePool,
)

Vector = tuple  # tuple[float, ...]

QUOTE_REL_TOL = 1e-9


def vector(values: Iterable[float], n: Optional[int] = None) -> Vector:
    out = tuple(float(v) for v in values)
    if n is not None and len(out) != n:
        raise DimensionMismatch(f"expected {n} components, got {len(out)}")
    for v in out:
        if not math.isfinite(v):
            raise NonFiniteValue(f"non-finite component {v!r}")
    return out


def zeros(n: int) -> Vector:
    return (0.0,) * n


def vadd(a: Sequence[float], b: Sequence[float]) -> Vector:
    if len(a) != len(b):
        raise DimensionMismatch(f"{len(a)} != {len(b)}")
    return tuple(x + y for x, y in zip(a, b))


def vsub(a: Sequence[float], b: Sequence[float]) -> Vector:
    if len(a) != len(b):
        raise DimensionMismatch(f"{len(a)} != {len(b)}")
    return tuple(x - y for x, y in zip(a, b))


def vscale(a: Sequence[float], s: float) -> Vector:
    return tuple(x * s for x in a)


def dot(a: Sequence[float], b: Sequence[float]) -> float:
    return math.fsum(x * y for x, y in zip(a, b))


def check_index(i: int, n: int) -> int:
    if not isinstance(i, int) or isinstance(i, bool) or not 1 <= i <= n:
        raise BadSolveIndex(f"asset index {i!r} outside [1, {n}]")
    return i


@dataclass(frozen=True)
class FeeParams:
    """Total fee rate ``gamma`` and the protocol's fraction ``phi`` of it."""

    gamma: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.gamma < 1.0):
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not (0.0 <= self.phi <= 1.0):
            raise ValueError(f"phi must lie in [0, 1], got {self.phi}")

    def gross_up(self, delta: float) -> float:
        return delta / (1.0 - self.gamma) if delta > 0 else delta


@dataclass(frozen=True)
class FeeAccrual:
    lp_fees: Vector
    treasury_fees: Vector


@dataclass(frozen=True)
class TradeEvent:
    """Pool-perspective trade; ``deltas[solve_for - 1]`` is ``None`` until solved."""

    deltas: tuple
    solve_for: int
    timestamp: int = 0

    @property
    def n_assets(self) -> int:
        return len(self.deltas)

    def given(self) -> dict:
        """Map of 1-based index to given delta, excluding the solved leg."""
        return {
            i + 1: d for i, d in enumerate(self.deltas) if i + 1 != self.solve_for
        }

    def with_solution(self, delta_k: float) -> Vector:
        out = list(self.deltas)
        out[self.solve_for - 1] = float(delta_k)
        return tuple(out)


@dataclass(frozen=True)
class QuoteEvent:
    """Liquidity provision (all deltas > 0) or withdrawal (all < 0).

    ``price_range`` is only used by concentrated pools: the (lower, upper]
    bounds of the position in units of asset 2 per asset 1.
    """

    deltas: tuple
    lp_id: str
    timestamp: int = 0
    price_range: Optional[tuple] = None


@dataclass(frozen=True)
class ValidatedQuote:
    event: QuoteEvent
    direction: str  # "provide" | "withdraw"

    @property
    def deltas(self) -> Vector:
        return self.event.deltas

    @property
    def lp_id(self) -> str:
        return self.event.lp_id


def validate_trade(event: TradeEvent, n_assets: int) -> TradeEvent:
    if len(event.deltas) != n_assets:
        raise DimensionMismatch(
            f"trade has {len(event.deltas)} legs, pool has {n_assets} assets"
        )
    k = check_index(event.solve_for, n_assets)
    if event.deltas[k - 1] is not None:
        raise BadSolveIndex(f"leg {k} is the solved leg and must be None")
    given = event.given()
    for i, d in given.items():
        if d is None:
            raise BadSolveIndex(f"leg {i} is missing but is not the solved leg")
        if not math.isfinite(d):
            raise NonFiniteValue(f"leg {i} is not finite: {d!r}")
    # Any sign pattern among the given legs is satisfiable: the solved leg
    # takes the opposite sign of the net given flow.
    if all(d == 0 for d in given.values()):
        raise AllZeroTrade("every given leg is zero")
    return event


def quote_direction(deltas: Sequence[float]) -> str:
    for d in deltas:
        if not math.isfinite(d):
            raise NonFiniteValue(f"quote leg is not finite: {d!r}")
    pos = any(d > 0 for d in deltas)
    neg = any(d < 0 for d in deltas)
    if pos and neg:
        raise MixedSigns("quote mixes deposits and withdrawals")
    if not pos and not neg:
        raise AllZeroTrade("quote moves no assets")
    return "provide" if pos else "withdraw"


def validate_quote(event: QuoteEvent, current: Sequence[float]) -> ValidatedQuote:
    deltas = event.deltas
    if len(deltas) != len(current):
        raise DimensionMismatch(
            f"quote has {len(deltas)} legs, pool has {len(current)} assets"
        )
    direction = quote_direction(deltas)
    if all(q == 0 for q in current):
        # Seeding an empty pool fixes its initial ratio.
        if direction != "provide" or any(d <= 0 for d in deltas):
            raise NonPositiveQuantity("an empty pool needs a deposit in every asset")
        return ValidatedQuote(event, direction)
    n = len(current)
    for i in range(n):
        if current[i] <= 0:
            if deltas[i] != 0:
                raise NonPositiveQuantity(f"asset {i + 1} has no reserves")
            continue
        for j in range(n):
            if i == j or current[j] <= 0:
                continue
            target = current[i] / current[j]
            if deltas[j] == 0:
                raise DisproportionateQuote(
                    f"leg {j + 1} is zero while leg {i + 1} is not"
                )
            if abs(deltas[i] / deltas[j] - target) > QUOTE_REL_TOL * target:
                raise DisproportionateQuote(
                    f"legs {i + 1}/{j + 1} ratio {deltas[i] / deltas[j]!r} "
                    f"differs from pool ratio {target!r}"
                )
    return ValidatedQuote(event, direction)


def weight(q: Sequence[float], prices_in_j: Sequence[float], i: int) -> float:
    """Fraction of pool value held in asset ``i`` (1-based)."""
    check_index(i, len(q))
    total = dot(q, prices_in_j)
    if total <= 0:
        raise ZeroValuePool("pool holds no value")
    return q[i - 1] * prices_in_j[i - 1] / total


def aggregate_quotes(quotes: Sequence, n_assets: Optional[int] = None) -> Vector:
    """Componentwise sum of quote deltas; accepts events or raw vectors."""
    rows = [q.deltas if hasattr(q, "deltas") else tuple(q) for q in quotes]
    if n_assets is None:
        if not rows:
            raise DimensionMismatch("cannot infer dimension of an empty quote list")
        n_assets = len(rows[0])
    for r in rows:
        if len(r) != n_assets:
            raise DimensionMismatch(f"quote of length {len(r)} in {n_assets}-asset pool")
    # fsum makes the result exact-rounded and hence order independent
    return tuple(math.fsum(r[i] for r in rows) for i in range(n_assets))
