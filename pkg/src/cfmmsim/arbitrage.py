"""Price-balance diagnostics and equilibration against external prices."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from . import cfmm
from .cfmm import CONSTANT_MEAN, CONSTANT_PRODUCT, CfmmSpec  # noqa: F401
from .concentrated_pool import ConcentratedPoolState, execute_trade, trade_to_price
from .core import TradeEvent, check_index, vector
from .errors import (
    LiquidityExhausted,
    NonPositiveQuantity,
    SolverNoConverge,
    UnsupportedSpec,
)
from .rootfind import bracketed_root_solve
from .uniform_pool import UniformPoolState, apply_trade

EQUILIBRIUM_TOL = 1e-9
FEE_FREE = "fee_free"
FEE_AWARE = "fee_aware"
MAX_SWEEPS = 200


def check_prices(p: Sequence[float]) -> tuple:
    p = vector(p)
    if any(not x > 0 for x in p):
        raise NonPositiveQuantity(f"FIAT prices must be positive: {p}")
    return p


def specific_arbitrage(Z, p: Sequence[float], i: int, j: int) -> float:
    """``Z[i][j] - p_i / p_j`` for 1-based ``i``, ``j``."""
    n = len(p)
    check_index(i, n)
    check_index(j, n)
    if i == j:
        return 0.0
    return Z[i - 1][j - 1] - p[i - 1] / p[j - 1]


def total_arbitrage(Z, p: Sequence[float], j: int) -> float:
    return math.fsum(specific_arbitrage(Z, p, i, j) for i in range(1, len(p) + 1))


@dataclass(frozen=True)
class ArbitrageReport:
    specific: tuple
    total: tuple
    in_equilibrium: bool

    @property
    def max_deviation(self) -> float:
        return max(abs(x) for row in self.specific for x in row)


def arbitrage_report(Z, p: Sequence[float], tol: float = EQUILIBRIUM_TOL) -> ArbitrageReport:
    """Pairwise and total arbitrage; equilibrium is judged relative to ``p_i / p_j``."""
    p = check_prices(p)
    n = len(p)
    specific = tuple(
        tuple(specific_arbitrage(Z, p, i, j) for j in range(1, n + 1))
        for i in range(1, n + 1)
    )
    total = tuple(total_arbitrage(Z, p, j) for j in range(1, n + 1))
    ok = all(
        abs(specific[i][j]) <= tol * p[i] / p[j] for i in range(n) for j in range(n)
    )
    return ArbitrageReport(specific, total, ok)


def pool_report(pool, p: Sequence[float], tol: float = EQUILIBRIUM_TOL) -> ArbitrageReport:
    return arbitrage_report(pool.price_matrix(), p, tol)


def equilibrium_quantities(spec: CfmmSpec, q: Sequence[float], p: Sequence[float]) -> tuple:
    """Point on the level set of ``q`` where every price equals ``p_i / p_j``."""
    p = check_prices(p)
    K = cfmm.invariant(spec, q)
    if spec.kind == CONSTANT_PRODUCT:
        return (math.sqrt(K * p[1] / p[0]), math.sqrt(K * p[0] / p[1]))
    if spec.kind == CONSTANT_MEAN:
        # value fractions equal the weights: q_i* = c * w_i / p_i
        w = spec.weights
        log_c = math.log(K) - math.fsum(wi * math.log(wi / pi) for wi, pi in zip(w, p))
        c = math.exp(log_c)
        return tuple(c * wi / pi for wi, pi in zip(w, p))
    return equilibrium_quantities_numeric(spec, q, p)


def equilibrium_quantities_numeric(
    spec: CfmmSpec, q: Sequence[float], p: Sequence[float], tol: float = EQUILIBRIUM_TOL
) -> tuple:
    """Pairwise sweeps: trade asset ``i`` against asset ``N`` until ``Z_iN = p_i/p_N``.

    Each step is a one-dimensional bracketed solve along the level set; the
    sweeps repeat until every pair is within ``tol``.
    """
    n = spec.n_assets
    cur = list(q)
    last = n
    for _ in range(MAX_SWEEPS):
        worst = 0.0
        for i in range(1, n):
            target = p[i - 1] / p[last - 1]
            z = cfmm.spot_price(spec, cur, i, last)
            worst = max(worst, abs(z - target) / target)
            if abs(z - target) <= 0.1 * tol * target:
                continue
            cur = _pair_equilibrate(spec, cur, i, last, target)
        if worst <= tol:
            return tuple(cur)
    raise SolverNoConverge("pairwise equilibration did not converge")


def _pair_equilibrate(spec, q, i, j, target):
    """Move along the (i, j) level-set slice until ``Z_ij`` equals ``target``."""

    def moved(log_ratio):
        qi = q[i - 1] * math.exp(log_ratio)
        dj = cfmm.solve_trade(spec, q, {i: qi - q[i - 1]}, j)
        out = list(q)
        out[i - 1] = qi
        out[j - 1] = q[j - 1] + dj
        return out

    # Z_ij falls as q_i grows (convexity); search in log q_i
    def g(t):
        return math.log(cfmm.spot_price(spec, moved(t), i, j) / target)

    lo, hi = -1.0, 1.0
    for _ in range(100):
        if g(lo) > 0:
            break
        lo *= 2
    for _ in range(100):
        if g(hi) < 0:
            break
        hi *= 2
    t = bracketed_root_solve(g, lo, hi, rel_tol=1e-15, ftol=1e-14)
    return moved(t)


def _trade_between(q, target, p) -> Optional[TradeEvent]:
    delta = [t - x for t, x in zip(target, q)]
    # Solve for the most drained asset: its new reserve then comes from the
    # direct solve instead of q + dq, which would lose its low digits.
    k = min(range(len(q)), key=lambda a: target[a] / q[a]) + 1
    deltas = tuple(None if a == k - 1 else d for a, d in enumerate(delta))
    return TradeEvent(deltas, k)


def equilibrate(pool, p: Sequence[float], mode: str = FEE_FREE, timestamp: int = 0):
    """Arbitrage trade restoring ``Z_ij = p_i / p_j``; ``None`` if already there.

    ``fee_free`` solves the condition on the invariant alone, which is exact
    when the trade pays no fee. ``fee_aware`` (two-asset uniform pools)
    chooses the fee-free leg such that the reserves after fees are retained
    satisfy the condition.
    """
    p = check_prices(p)
    if mode not in (FEE_FREE, FEE_AWARE):
        raise ValueError(f"unknown equilibration mode {mode!r}")
    if pool_report(pool, p).in_equilibrium:
        return None
    if isinstance(pool, ConcentratedPoolState):
        return _equilibrate_concentrated(pool, p, timestamp)
    if mode == FEE_AWARE and pool.fees.gamma > 0:
        return _equilibrate_fee_aware(pool, p, timestamp)
    target = equilibrium_quantities(pool.spec, pool.q, p)
    trade = _trade_between(pool.q, target, p)
    return replace(trade, timestamp=timestamp)


def _equilibrate_concentrated(pool: ConcentratedPoolState, p, timestamp):
    trade, reached = trade_to_price(pool, p[0] / p[1])
    if trade is None and reached:
        return None
    if not reached:
        report = None
        if trade is not None:
            trade = replace(trade, timestamp=timestamp)
            partial = trade
            for _ in range(4):
                try:
                    after = execute_trade(pool, partial).state
                    report = pool_report(after, p)
                    trade = partial
                    break
                except LiquidityExhausted:
                    # float overshoot past the last liquid tick
                    amt = partial.deltas[0] * (1 - 1e-12)
                    partial = replace(partial, deltas=(amt, None))
        raise LiquidityExhausted(
            "target price lies beyond the liquidity on the grid",
            trade=trade, report=report,
        )
    return replace(trade, timestamp=timestamp)


def _equilibrate_fee_aware(pool: UniformPoolState, p, timestamp):
    if pool.n_assets != 2:
        raise UnsupportedSpec("fee-aware equilibration is implemented for two assets")
    target = p[0] / p[1]
    z = pool.spot_price(1, 2)
    # asset 1 is overpriced in the pool: arbitrageurs sell asset 1 into it
    inbound = 1 if z > target else 2
    k = 2 if inbound == 1 else 1

    def deviation(t):
        if t == 0.0:
            return math.log(z / target)
        d = pool.q[inbound - 1] * math.expm1(t)
        deltas = [None, None]
        deltas[inbound - 1] = d
        after = apply_trade(pool, TradeEvent(tuple(deltas), k)).state
        return math.log(after.spot_price(1, 2) / target)

    sign = 1.0 if inbound == 1 else -1.0
    hi = 1e-3
    for _ in range(100):
        if sign * deviation(hi) < 0:
            break
        hi *= 2
    t = bracketed_root_solve(deviation, 0.0, hi, rel_tol=1e-15, ftol=1e-14)
    deltas = [None, None]
    deltas[inbound - 1] = pool.q[inbound - 1] * math.expm1(t)
    return TradeEvent(tuple(deltas), k, timestamp)
