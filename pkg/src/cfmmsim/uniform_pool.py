"""Full-range liquidity pool with fee accrual and LP share bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Sequence

from . import cfmm
from .cfmm import CfmmSpec
from .core import (
    FeeAccrual,
    FeeParams,
    QuoteEvent,
    TradeEvent,
    ValidatedQuote,
    Vector,
    vadd,
    validate_quote,
    validate_trade,
    vector,
    zeros,
)
from .errors import InsolventTrade, NonPositiveQuantity, Overdraw, UnknownLp

SHARE_TOL = 1e-12


@dataclass(frozen=True)
class UniformPoolState:
    """Immutable snapshot of a full-range pool.

    ``q`` are the live reserves and include LP fees retained by the pool.
    ``q_nofee`` is a shadow ledger that moves by the fee-free trade and
    quote deltas only, so ``q - q_nofee`` is the fee income still in the
    pool. Protocol fees leave the reserves for ``treasury``.
    """

    spec: CfmmSpec
    q: Vector
    q_nofee: Vector
    depth: float
    fees: FeeParams
    lp_shares: dict = field(default_factory=dict)
    lp_fees: dict = field(default_factory=dict)
    cumulative_lp_fees: Vector = ()
    treasury: Vector = ()

    @classmethod
    def empty(cls, spec: CfmmSpec, fees: FeeParams = FeeParams()) -> "UniformPoolState":
        n = spec.n_assets
        return cls(spec, zeros(n), zeros(n), 0.0, fees, {}, {}, zeros(n), zeros(n))

    @classmethod
    def seeded(
        cls,
        spec: CfmmSpec,
        quantities: Sequence[float],
        fees: FeeParams = FeeParams(),
        lp_id: str = "genesis",
    ) -> "UniformPoolState":
        pool = cls.empty(spec, fees)
        return apply_quote(pool, QuoteEvent(vector(quantities, spec.n_assets), lp_id))

    @property
    def n_assets(self) -> int:
        return self.spec.n_assets

    @property
    def is_empty(self) -> bool:
        return not self.lp_shares

    def spot_price(self, i: int, j: int) -> float:
        return cfmm.spot_price(self.spec, self.q, i, j)

    def price_matrix(self) -> tuple:
        return cfmm.price_matrix(self.spec, self.q)

    def lp_quantities(self, lp_id: str) -> Vector:
        """LP's fee-free holdings, its share of the shadow reserves."""
        r = self.lp_shares.get(lp_id, 0.0)
        return tuple(r * x for x in self.q_nofee)


class TradeOutcome(NamedTuple):
    state: UniformPoolState
    accrual: FeeAccrual
    executed: Vector  # fee-inclusive deltas paid by / to the trader
    fee_free: Vector  # deltas solved on the invariant
    gross_depth: float  # F(q + executed), before the protocol fee leaves


def apply_trade(state: UniformPoolState, trade: TradeEvent) -> TradeOutcome:
    n = state.n_assets
    validate_trade(trade, n)
    if state.is_empty:
        raise InsolventTrade("pool has no liquidity")
    k = trade.solve_for
    qk_new = cfmm.solve_reserve(state.spec, state.q, trade.deltas, k)
    if state.spec.kind == cfmm.CUSTOM:
        dk = qk_new - state.q[k - 1]
    else:
        dk = cfmm.solve_trade(state.spec, state.q, trade.deltas, k)
    delta = trade.with_solution(dk)
    for i in range(n):
        if not state.q[i] + delta[i] > 0 or not qk_new > 0:
            raise InsolventTrade(f"asset {i + 1} would be drained")

    gamma, phi = state.fees.gamma, state.fees.phi
    executed = tuple(state.fees.gross_up(d) for d in delta)
    inbound = tuple(max(d, 0.0) for d in executed)
    lp_fee = tuple(gamma * (1 - phi) * x for x in inbound)
    treasury_fee = tuple(gamma * phi * x for x in inbound)

    gross = vadd(state.q, executed)
    gross_depth = cfmm.invariant(state.spec, gross)
    # the trader's surplus over the fee-free leg is exactly lp + treasury fee;
    # only the LP part stays in the reserves
    live = [q + d + f for q, d, f in zip(state.q, delta, lp_fee)]
    # the solved reserve is taken from the direct solve, not q + dq
    live[k - 1] = qk_new + lp_fee[k - 1]
    live = tuple(live)
    lp_fees = {
        lp: tuple(a + r * f for a, f in zip(state.lp_fees[lp], lp_fee))
        for lp, r in state.lp_shares.items()
    }
    new_state = replace(
        state,
        q=live,
        q_nofee=vadd(state.q_nofee, delta),
        depth=cfmm.invariant(state.spec, live),
        lp_fees=lp_fees,
        cumulative_lp_fees=vadd(state.cumulative_lp_fees, lp_fee),
        treasury=vadd(state.treasury, treasury_fee),
    )
    return TradeOutcome(
        new_state, FeeAccrual(lp_fee, treasury_fee), executed, delta, gross_depth
    )


def apply_quote(state: UniformPoolState, quote) -> UniformPoolState:
    """Deposit or withdraw proportionally and rebalance LP shares.

    Shares follow summed asset quantities: after the quote the LP owns
    ``(r * sum(q) + sum(dq)) / (sum(q) + sum(dq))`` and everyone else is
    scaled down (or up) by the change in the pool total.
    """
    if isinstance(quote, ValidatedQuote):
        vq = quote
    else:
        vq = validate_quote(quote, state.q)
    deltas = vector(vq.deltas, state.n_assets)
    lp = vq.lp_id

    if state.is_empty:
        if vq.direction != "provide":
            raise UnknownLp(f"{lp!r} cannot withdraw from an empty pool")
        q_new = vadd(state.q, deltas)
        return replace(
            state,
            q=q_new,
            q_nofee=vadd(state.q_nofee, deltas),
            depth=cfmm.invariant(state.spec, q_new),
            lp_shares={lp: 1.0},
            lp_fees={**state.lp_fees, lp: state.lp_fees.get(lp, zeros(state.n_assets))},
        )

    total = math.fsum(state.q)
    moved = math.fsum(deltas)
    r_old = state.lp_shares.get(lp, 0.0)
    if vq.direction == "withdraw":
        if r_old <= 0.0:
            raise UnknownLp(f"{lp!r} holds no share of the pool")
        if -moved > r_old * total * (1 + SHARE_TOL):
            raise Overdraw(f"{lp!r} withdraws {-moved!r} of {r_old * total!r}")

    new_total = total + moved
    r_new = (r_old * total + moved) / new_total if new_total > 0 else 0.0
    exits = vq.direction == "withdraw" and r_new <= SHARE_TOL

    shares = {}
    for other, r in state.lp_shares.items():
        if other != lp:
            shares[other] = r * total / new_total if new_total > 0 else 0.0
    if not exits:
        shares[lp] = r_new
    if shares:
        norm = math.fsum(shares.values())
        shares = {k: v / norm for k, v in shares.items()}

    lp_fees = dict(state.lp_fees)
    lp_fees.setdefault(lp, zeros(state.n_assets))

    if not shares:
        # last LP left: the pool is empty again
        return replace(
            state,
            q=zeros(state.n_assets),
            q_nofee=vadd(state.q_nofee, deltas),
            depth=0.0,
            lp_shares={},
            lp_fees=lp_fees,
        )
    q_new = vadd(state.q, deltas)
    if any(x <= 0 for x in q_new):
        raise NonPositiveQuantity("withdrawal would drain an asset")
    return replace(
        state,
        q=q_new,
        q_nofee=vadd(state.q_nofee, deltas),
        depth=cfmm.depth_after_quote(state.spec, state.q, deltas),
        lp_shares=shares,
        lp_fees=lp_fees,
    )


def lp_fee_share(state: UniformPoolState, lp_id: str) -> Vector:
    """Fees credited to ``lp_id``, accumulated trade by trade at its share then."""
    if lp_id not in state.lp_fees:
        raise UnknownLp(f"unknown LP {lp_id!r}")
    return state.lp_fees[lp_id]


def lp_share(state: UniformPoolState, lp_id: str) -> float:
    if lp_id not in state.lp_shares:
        raise UnknownLp(f"unknown LP {lp_id!r}")
    return state.lp_shares[lp_id]


def withdraw_all(state: UniformPoolState, lp_id: str, timestamp: int = 0) -> QuoteEvent:
    """The quote that takes ``lp_id``'s whole share out of the pool."""
    r = lp_share(state, lp_id)
    return QuoteEvent(tuple(-r * x for x in state.q), lp_id, timestamp)


def proportional_quote(
    state: UniformPoolState, alpha: float, lp_id: str, timestamp: int = 0
) -> QuoteEvent:
    return QuoteEvent(tuple(alpha * x for x in state.q), lp_id, timestamp)


def seeded_pool(
    spec: CfmmSpec, quantities, gamma: float = 0.0, phi: float = 0.0,
    lp_id: Optional[str] = "genesis",
) -> UniformPoolState:
    return UniformPoolState.seeded(spec, quantities, FeeParams(gamma, phi), lp_id)
