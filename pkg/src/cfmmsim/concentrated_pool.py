"""Concentrated liquidity on a tick grid.

Prices on the grid are ``Z_{1,2}``, units of asset 2 per unit of asset 1.
Liquidity is tracked as ``L = sqrt(K_v)`` per position; a position's real
quantities at the current price follow from ``L`` and its range, and the
virtual pool of the active unit range has depth ``(sum of covering L)**2``.

The data model (:class:`TickGrid`, :class:`PriceRange`) is dimension
generic; trade execution and virtual reserves are implemented for two-asset
constant-product pools only.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import cfmm, kernels
from .cfmm import CONSTANT_PRODUCT, CfmmSpec
from .core import (
    FeeAccrual,
    FeeParams,
    QuoteEvent,
    TradeEvent,
    Vector,
    quote_direction,
    vadd,
    validate_trade,
    vector,
    zeros,
)
from .errors import (
    AllZeroTrade,
    DisproportionateQuote,
    EmptyRange,
    InconsistentDepth,
    LiquidityExhausted,
    OffGridRange,
    Overdraw,
    PriceOffGrid,
    SolverNoConverge,
    UnknownLp,
    UnsupportedSpec,
)
from .rootfind import bracketed_root_solve

GRID_REL_TOL = 1e-12
QUOTE_REL_TOL = 1e-9
BETA_TOL = 1e-12


@dataclass(frozen=True)
class TickGrid:
    """Strictly increasing tick prices, one tuple per asset pair ``(n, n+1)``."""

    ticks: tuple

    def __post_init__(self):
        if not self.ticks:
            raise ValueError("a grid needs at least one dimension")
        for dim in self.ticks:
            if len(dim) < 2:
                raise ValueError("each grid dimension needs at least two ticks")
            if any(t <= 0 or not math.isfinite(t) for t in dim):
                raise ValueError("ticks must be positive and finite")
            if any(b <= a for a, b in zip(dim, dim[1:])):
                raise ValueError("ticks must be strictly increasing")

    @classmethod
    def from_ticks(cls, *dims: Sequence[float]) -> "TickGrid":
        return cls(tuple(tuple(float(t) for t in d) for d in dims))

    @classmethod
    def geometric(cls, min_price: float, max_price: float, ratio: float) -> "TickGrid":
        """Ticks ``min * ratio**n`` up to ``max_price``; the top tick is ``max_price``."""
        if not (0 < min_price < max_price) or ratio <= 1:
            raise ValueError("need 0 < min_price < max_price and ratio > 1")
        count = int(math.floor(math.log(max_price / min_price) / math.log(ratio) + 1e-9))
        ticks = [min_price * ratio**n for n in range(count + 1)]
        if max_price / ticks[-1] - 1 > 1e-9:
            ticks.append(max_price)
        else:
            ticks[-1] = max_price
        return cls((tuple(ticks),))

    @property
    def dims(self) -> int:
        return len(self.ticks)

    def n_ranges(self, d: int = 0) -> int:
        return len(self.ticks[d]) - 1

    def tick_index(self, price: float, d: int = 0) -> int:
        dim = self.ticks[d]
        i = bisect.bisect_left(dim, price)
        for j in (i - 1, i):
            if 0 <= j < len(dim) and abs(dim[j] - price) <= GRID_REL_TOL * dim[j]:
                return j
        raise OffGridRange(f"price {price!r} is not a tick")

    def unit_range(self, index: int) -> "PriceRange":
        if self.dims != 1:
            raise UnsupportedSpec("unit_range by index needs a one-dimensional grid")
        dim = self.ticks[0]
        return PriceRange(((dim[index], dim[index + 1]),))


@dataclass(frozen=True)
class PriceRange:
    """(lower, upper] bounds, one row per asset pair."""

    bounds: tuple

    def __post_init__(self):
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError(f"empty price range ({lo}, {hi}]")

    @classmethod
    def of(cls, lower: float, upper: float) -> "PriceRange":
        return cls(((float(lower), float(upper)),))

    @property
    def lower(self) -> float:
        return self.bounds[0][0]

    @property
    def upper(self) -> float:
        return self.bounds[0][1]

    def covers(self, other: "PriceRange") -> bool:
        """``other`` is a subset of this range."""
        return all(
            lo <= olo and ohi <= hi
            for (lo, hi), (olo, ohi) in zip(self.bounds, other.bounds)
        )

    def on_grid(self, grid: TickGrid) -> "PriceRange":
        """Same range with bounds snapped to the grid's exact tick values."""
        if len(self.bounds) != grid.dims:
            raise OffGridRange("range dimension does not match the grid")
        rows = []
        for d, (lo, hi) in enumerate(self.bounds):
            rows.append((grid.ticks[d][grid.tick_index(lo, d)],
                         grid.ticks[d][grid.tick_index(hi, d)]))
        return PriceRange(tuple(rows))


@dataclass(frozen=True)
class LpPosition:
    lp_id: str
    range: PriceRange
    quantities: Vector
    uncollected_fees: Vector
    liquidity: float = 0.0

    @property
    def key(self) -> tuple:
        return (self.lp_id, self.range.bounds)


@dataclass(frozen=True)
class ActiveRangeState:
    active: PriceRange
    virtual_q: Vector
    virtual_depth: float
    real_q_in_range: Vector
    spec: CfmmSpec = field(default_factory=CfmmSpec.constant_product)


@dataclass(frozen=True)
class TradeSegment:
    range: PriceRange
    beta: float
    deltas: Vector  # fee-free
    executed: Vector  # inbound legs grossed up by 1 / (1 - gamma)
    lp_fees: Vector
    treasury_fees: Vector
    crossed: bool = False
    depleted_residual: float = 0.0
    end_price: float = 0.0


# -- liquidity <-> amounts --------------------------------------------------

def amounts_for_liquidity(liquidity: float, lower: float, upper: float, price: float) -> Vector:
    """Real quantities held by liquidity ``L`` on ``(lower, upper]`` at ``price``."""
    s = math.sqrt(min(max(price, lower), upper))
    return (liquidity * (1.0 / s - 1.0 / math.sqrt(upper)),
            liquidity * (s - math.sqrt(lower)))


def _per_unit_liquidity(lower: float, upper: float, price: float) -> Vector:
    return amounts_for_liquidity(1.0, lower, upper, price)


# -- range shares ----------------------------------------------------------

def range_quantities(
    positions: Sequence[LpPosition], unit_range: PriceRange, grid: Optional[TickGrid] = None
) -> Vector:
    """Sum of the quantities of every position whose range covers ``unit_range``."""
    if grid is not None:
        unit_range = unit_range.on_grid(grid)
        for d, (lo, hi) in enumerate(unit_range.bounds):
            if grid.tick_index(hi, d) != grid.tick_index(lo, d) + 1:
                raise OffGridRange("not a unit range: bounds are not adjacent ticks")
    if not positions:
        return ()
    n = len(positions[0].quantities)
    total = [0.0] * n
    for p in positions:
        if p.range.covers(unit_range):
            for i in range(n):
                total[i] += p.quantities[i]
    return tuple(total)


def range_share(positions: Sequence[LpPosition], lp_id: str, unit_range: PriceRange) -> float:
    """Share of the liquidity in ``unit_range`` owned by ``lp_id``, by summed quantities."""
    denom = math.fsum(range_quantities(positions, unit_range))
    if denom <= 0:
        raise EmptyRange("no liquidity in the unit range")
    own = math.fsum(
        x for p in positions
        if p.lp_id == lp_id and p.range.covers(unit_range)
        for x in p.quantities
    )
    return own / denom


# -- virtual pool ------------------------------------------------------------

def _require_cpmm(spec: CfmmSpec):
    if spec.kind != CONSTANT_PRODUCT or spec.n_assets != 2:
        raise UnsupportedSpec("virtual reserves are defined for two-asset constant product")


def virtualize(
    real_q: Sequence[float],
    price_range,
    virtual_depth: float,
    spec: Optional[CfmmSpec] = None,
) -> Vector:
    """Translate real in-range quantities to virtual ones.

    The offsets ``sqrt(K_v / upper)`` and ``sqrt(K_v * lower)`` are the
    virtual reserves left at the upper and lower bound, so the real asset 1
    runs out exactly at the upper bound and asset 2 at the lower bound.
    """
    _require_cpmm(spec or CfmmSpec.constant_product())
    if isinstance(price_range, PriceRange):
        lower, upper = price_range.lower, price_range.upper
    else:
        lower, upper = price_range
    if len(real_q) != 2:
        raise UnsupportedSpec("virtual reserves need exactly two assets")
    xv = real_q[0] + math.sqrt(virtual_depth / upper)
    yv = real_q[1] + math.sqrt(virtual_depth * lower)
    if abs(xv * yv - virtual_depth) > 1e-9 * virtual_depth:
        raise InconsistentDepth(
            f"virtual product {xv * yv!r} does not match depth {virtual_depth!r}"
        )
    return (xv, yv)


def find_active_range(grid: TickGrid, spot_prices) -> PriceRange:
    """Unit range with ``lower < Z <= upper`` in every dimension."""
    if isinstance(spot_prices, (int, float)):
        spot_prices = (spot_prices,)
    if len(spot_prices) != grid.dims:
        raise PriceOffGrid("one spot price per grid dimension is required")
    rows = []
    for d, z in enumerate(spot_prices):
        idx = _active_index(grid.ticks[d], z)
        rows.append((grid.ticks[d][idx], grid.ticks[d][idx + 1]))
    return PriceRange(tuple(rows))


def _active_index(ticks: Sequence[float], z: float) -> int:
    i = bisect.bisect_left(ticks, z)
    if i == 0 or i == len(ticks):
        raise PriceOffGrid(f"price {z!r} outside grid ({ticks[0]}, {ticks[-1]}]")
    return i - 1


def solve_crossing_control(state: ActiveRangeState, trade: TradeEvent):
    """Smallest control ``beta`` in (0, 1] at which the price reaches a bound.

    Returns ``(beta, boundary)`` with boundary ``"lower"``, ``"upper"`` or
    ``"none"`` when the trade completes inside the range. A trade ending
    exactly on the upper bound stays in range; one ending exactly on the
    lower bound reports ``"lower"``, since that price belongs to the range
    below.
    """
    try:
        validate_trade(trade, 2)
    except AllZeroTrade:
        return 1.0, "none"
    (i, d), = trade.given().items()
    lower, upper = state.active.lower, state.active.upper
    if state.spec.kind == CONSTANT_PRODUCT:
        x, y = state.virtual_q
        K = state.virtual_depth
        if i == 1:
            down = d > 0
            target = math.sqrt(K / lower) if down else math.sqrt(K / upper)
            beta = (target - x) / d
        else:
            down = d < 0
            target = math.sqrt(K * lower) if down else math.sqrt(K * upper)
            beta = (target - y) / d
        return _classify(beta, down)
    return _solve_crossing_numeric(state, i, d)


def _classify(beta: float, down: bool):
    if down:
        return (beta, "lower") if beta <= 1.0 else (1.0, "none")
    return (beta, "upper") if beta < 1.0 else (1.0, "none")


def _solve_crossing_numeric(state: ActiveRangeState, i: int, d: float):
    """Crossing control by root finding on ``Z(beta)`` for any two-asset spec."""
    spec, q = state.spec, state.virtual_q
    k = 2 if i == 1 else 1

    def price_at(beta):
        dk = cfmm.solve_trade(spec, q, {i: beta * d}, k)
        moved = list(q)
        moved[i - 1] += beta * d
        moved[k - 1] += dk
        return cfmm.spot_price(spec, moved, 1, 2)

    z0, z1 = price_at(0.0), price_at(1.0)
    down = z1 < z0
    bound = state.active.lower if down else state.active.upper
    if (down and z1 > bound) or (not down and z1 <= bound):
        return 1.0, "none"
    try:
        beta = bracketed_root_solve(lambda b: price_at(b) - bound, 0.0, 1.0, rel_tol=BETA_TOL)
    except Exception as exc:
        raise SolverNoConverge(str(exc)) from exc
    return _classify(beta, down)


# -- pool state --------------------------------------------------------------

@dataclass(frozen=True)
class ConcentratedPoolState:
    spec: CfmmSpec
    grid: TickGrid
    fees: FeeParams
    sqrt_price: float
    active: int
    positions: tuple = ()
    q_nofee: Vector = (0.0, 0.0)
    cumulative_lp_fees: Vector = (0.0, 0.0)
    treasury: Vector = (0.0, 0.0)
    lp_fees: dict = field(default_factory=dict)

    @classmethod
    def create(
        cls,
        grid: TickGrid,
        price: float,
        fees: FeeParams = FeeParams(),
        spec: Optional[CfmmSpec] = None,
    ) -> "ConcentratedPoolState":
        spec = spec or CfmmSpec.constant_product()
        _require_cpmm(spec)
        if grid.dims != 1:
            raise UnsupportedSpec("trade execution supports a single asset pair")
        active = _active_index(grid.ticks[0], price)
        return cls(spec, grid, fees, math.sqrt(price), active)

    @property
    def n_assets(self) -> int:
        return 2

    @property
    def price(self) -> float:
        return self.sqrt_price * self.sqrt_price

    @property
    def q(self) -> Vector:
        """Real reserves: every position's quantities at the current price."""
        if not self.positions:
            return (0.0, 0.0)
        return (math.fsum(p.quantities[0] for p in self.positions),
                math.fsum(p.quantities[1] for p in self.positions))

    @property
    def active_range(self) -> PriceRange:
        return self.grid.unit_range(self.active)

    def range_liquidity(self) -> np.ndarray:
        ticks = self.grid.ticks[0]
        liq = np.zeros(len(ticks) - 1)
        for p in self.positions:
            lo = self.grid.tick_index(p.range.lower)
            hi = self.grid.tick_index(p.range.upper)
            liq[lo:hi] += p.liquidity
        return liq

    def spot_price(self, i: int, j: int) -> float:
        if i == j:
            return 1.0
        return self.price if (i, j) == (1, 2) else 1.0 / self.price

    def price_matrix(self) -> tuple:
        return ((1.0, self.price), (1.0 / self.price, 1.0))

    def lp_quantities(self, lp_id: str) -> Vector:
        own = [p.quantities for p in self.positions if p.lp_id == lp_id]
        return (math.fsum(x for x, _ in own), math.fsum(y for _, y in own))

    def unit_slices(self, index: Optional[int] = None) -> list:
        """Positions restricted to one unit range, quantities at the current price."""
        index = self.active if index is None else index
        unit = self.grid.unit_range(index)
        out = []
        for p in self.positions:
            if p.range.covers(unit):
                q = amounts_for_liquidity(p.liquidity, unit.lower, unit.upper, self.price)
                out.append(LpPosition(p.lp_id, unit, q, zeros(2), p.liquidity))
        return out


def active_state(pool: ConcentratedPoolState) -> ActiveRangeState:
    unit = pool.active_range
    slices = pool.unit_slices()
    L = math.fsum(s.liquidity for s in slices)
    if L <= 0:
        raise LiquidityExhausted("active range holds no liquidity")
    real = range_quantities(slices, unit)
    K = L * L
    return ActiveRangeState(unit, virtualize(real, unit, K), K, real)


def _reprice(positions, price):
    return tuple(
        replace(p, quantities=amounts_for_liquidity(
            p.liquidity, p.range.lower, p.range.upper, price))
        for p in positions
    )


class ClTradeOutcome(NamedTuple):
    state: ConcentratedPoolState
    segments: list
    lp_fees: dict  # per LP fees earned by this trade
    accrual: FeeAccrual
    executed: Vector
    fee_free: Vector


def execute_trade(pool: ConcentratedPoolState, trade: TradeEvent) -> ClTradeOutcome:
    """Execute a two-asset trade, splitting it at every tick it crosses."""
    validate_trade(trade, 2)
    (i, amount), = trade.given().items()
    k = trade.solve_for
    liq = pool.range_liquidity()
    sqrt_ticks = np.sqrt(np.asarray(pool.grid.ticks[0], dtype=np.float64))
    (status, seg_range, seg_given, seg_solved, seg_residual, seg_crossed,
     active, sqrt_price) = kernels.tick_walk(
        sqrt_ticks, liq, pool.active, pool.sqrt_price, float(amount), i == 1)
    if status != kernels.OK:
        raise LiquidityExhausted("trade path leaves the liquidity on the grid")

    gamma, phi = pool.fees.gamma, pool.fees.phi
    positions = list(pool.positions)
    fee_acc = {}
    segments = []
    beta_used = 0.0
    m_total = len(seg_range)
    for m in range(m_total):
        l = int(seg_range[m])
        delta = [0.0, 0.0]
        delta[i - 1] = float(seg_given[m])
        delta[k - 1] = float(seg_solved[m])
        beta = 1.0 - beta_used if m == m_total - 1 else delta[i - 1] / amount
        beta_used += beta
        executed = tuple(pool.fees.gross_up(d) for d in delta)
        inbound = [max(d, 0.0) for d in executed]
        lam = tuple(gamma * (1 - phi) * x for x in inbound)
        treas = tuple(gamma * phi * x for x in inbound)
        # fee share in the unit range is the position's share of its liquidity
        covering = [idx for idx, p in enumerate(positions)
                    if p.range.covers(pool.grid.unit_range(l))]
        total_l = math.fsum(positions[idx].liquidity for idx in covering)
        for idx in covering:
            p = positions[idx]
            share = p.liquidity / total_l
            cut = tuple(share * f for f in lam)
            positions[idx] = replace(p, uncollected_fees=vadd(p.uncollected_fees, cut))
            fee_acc[p.lp_id] = vadd(fee_acc.get(p.lp_id, (0.0, 0.0)), cut)
        end = pool.grid.ticks[0][l + (0 if (delta[0] > 0) else 1)] if seg_crossed[m] else None
        segments.append(TradeSegment(
            range=pool.grid.unit_range(l),
            beta=beta,
            deltas=tuple(delta),
            executed=executed,
            lp_fees=lam,
            treasury_fees=treas,
            crossed=bool(seg_crossed[m]),
            depleted_residual=float(seg_residual[m]),
            end_price=end if end is not None else 0.0,
        ))
    if segments and not segments[-1].crossed:
        segments[-1] = replace(segments[-1], end_price=sqrt_price * sqrt_price)

    fee_free = tuple(math.fsum(s.deltas[a] for s in segments) for a in range(2))
    executed = tuple(math.fsum(s.executed[a] for s in segments) for a in range(2))
    lp_total = tuple(math.fsum(s.lp_fees[a] for s in segments) for a in range(2))
    tr_total = tuple(math.fsum(s.treasury_fees[a] for s in segments) for a in range(2))
    price = sqrt_price * sqrt_price
    lp_fees = dict(pool.lp_fees)
    for lp, v in fee_acc.items():
        lp_fees[lp] = vadd(lp_fees.get(lp, (0.0, 0.0)), v)
    new_pool = replace(
        pool,
        sqrt_price=sqrt_price,
        active=int(active),
        positions=_reprice(positions, price),
        q_nofee=vadd(pool.q_nofee, fee_free),
        cumulative_lp_fees=vadd(pool.cumulative_lp_fees, lp_total),
        treasury=vadd(pool.treasury, tr_total),
        lp_fees=lp_fees,
    )
    return ClTradeOutcome(new_pool, segments, fee_acc,
                          FeeAccrual(lp_total, tr_total), executed, fee_free)


class ClQuoteOutcome(NamedTuple):
    state: ConcentratedPoolState
    fees_paid: Vector


def apply_quote(pool: ConcentratedPoolState, quote: QuoteEvent) -> ClQuoteOutcome:
    """Open, grow, shrink or close a ranged position.

    The deposit must match the range's asset mix at the current price within
    relative 1e-9. Withdrawals collect the position's uncollected fees.
    """
    if quote.price_range is None:
        raise OffGridRange("a concentrated-liquidity quote needs a price range")
    deltas = vector(quote.deltas, 2)
    direction = quote_direction(deltas)
    rng = PriceRange.of(*quote.price_range).on_grid(pool.grid)
    ax, ay = _per_unit_liquidity(rng.lower, rng.upper, pool.price)
    dx, dy = abs(deltas[0]), abs(deltas[1])
    if ax == 0.0 or ay == 0.0:
        held, zero_leg = (dy, dx) if ax == 0.0 else (dx, dy)
        if zero_leg != 0.0:
            raise DisproportionateQuote("range holds a single asset at this price")
        L = held / (ay if ax == 0.0 else ax)
    else:
        lx, ly = dx / ax, dy / ay
        if abs(lx - ly) > QUOTE_REL_TOL * max(lx, ly):
            raise DisproportionateQuote(
                f"deposit mix {dx}:{dy} does not match range mix {ax}:{ay}"
            )
        L = lx

    positions = list(pool.positions)
    key = (quote.lp_id, rng.bounds)
    idx = next((n for n, p in enumerate(positions) if p.key == key), None)
    paid = (0.0, 0.0)
    if direction == "provide":
        if idx is None:
            positions.append(LpPosition(quote.lp_id, rng, (0.0, 0.0), (0.0, 0.0), L))
        else:
            positions[idx] = replace(positions[idx], liquidity=positions[idx].liquidity + L)
    else:
        if idx is None:
            raise UnknownLp(f"{quote.lp_id!r} has no position on {rng.bounds}")
        p = positions[idx]
        if L > p.liquidity * (1 + 1e-12):
            raise Overdraw(f"{quote.lp_id!r} withdraws {L!r} of {p.liquidity!r} liquidity")
        paid = p.uncollected_fees
        left = p.liquidity - L
        if left <= 1e-12 * p.liquidity:
            del positions[idx]
        else:
            positions[idx] = replace(p, liquidity=left, uncollected_fees=(0.0, 0.0))

    lp_fees = dict(pool.lp_fees)
    lp_fees.setdefault(quote.lp_id, (0.0, 0.0))
    new_pool = replace(
        pool,
        positions=_reprice(positions, pool.price),
        q_nofee=vadd(pool.q_nofee, deltas),
        lp_fees=lp_fees,
    )
    return ClQuoteOutcome(new_pool, paid)


def quote_for_liquidity(
    pool: ConcentratedPoolState, lp_id: str, lower: float, upper: float,
    liquidity: float, timestamp: int = 0,
) -> QuoteEvent:
    """Deposit (``liquidity > 0``) or withdrawal quote for a given liquidity."""
    x, y = amounts_for_liquidity(abs(liquidity), lower, upper, pool.price)
    sign = 1.0 if liquidity > 0 else -1.0
    return QuoteEvent((sign * x, sign * y), lp_id, timestamp, (lower, upper))


def trade_to_price(pool: ConcentratedPoolState, target_price: float):
    """Asset-1 leg that moves the price to ``target_price``.

    Walks range by range and stops at the last tick reachable with
    liquidity. Returns ``(trade_or_None, reached)``.
    """
    ticks = pool.grid.ticks[0]
    liq = pool.range_liquidity()
    s = pool.sqrt_price
    s_target = math.sqrt(target_price)
    active = pool.active
    parts = []
    reached = True
    if s_target == s:
        return None, True
    down = s_target < s
    while True:
        L = liq[active]
        if L <= 0:
            reached = False
            break
        s_b = math.sqrt(ticks[active]) if down else math.sqrt(ticks[active + 1])
        end = max(s_b, s_target) if down else min(s_b, s_target)
        parts.append(L / end - L / s)
        s = end
        if end == s_target:
            break
        if down:
            if active == 0:
                reached = False
                break
            active -= 1
        else:
            if active == len(liq) - 1:
                reached = False
                break
            active += 1
    amount = math.fsum(parts)
    if amount == 0.0:
        return None, reached
    return TradeEvent((amount, None), 2), reached
