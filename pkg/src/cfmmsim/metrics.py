"""Impermanent loss, relative value and LP profitability."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from . import cfmm, kernels
from .cfmm import CfmmSpec
from .core import FeeParams, TradeEvent, Vector, dot, vadd, vector
from .errors import (
    InconsistentLedger,
    UnsupportedSpec,
    UnsupportedWeights,
    ZeroHoldValue,
)
from .rootfind import bracketed_root_solve

LEDGER_TOL = 1e-9


@dataclass(frozen=True)
class Numeraire:
    """Unit of account: external FIAT or pool asset ``j`` (1-based)."""

    kind: str = "fiat"
    j: int = 0

    @classmethod
    def fiat(cls) -> "Numeraire":
        return cls("fiat", 0)

    @classmethod
    def asset(cls, j: int) -> "Numeraire":
        if j < 1:
            raise ValueError(f"asset numeraire index must be >= 1, got {j}")
        return cls("asset", j)

    @classmethod
    def parse(cls, text: str) -> "Numeraire":
        text = text.strip().lower()
        if text in ("fiat", "p"):
            return cls.fiat()
        if text.startswith("asset"):
            text = text[5:]
        return cls.asset(int(text))

    @property
    def label(self) -> str:
        return "fiat" if self.kind == "fiat" else f"asset{self.j}"


@dataclass(frozen=True)
class WindowLedger:
    """Quantities needed to value a pool (or one LP) over ``[t, T]``.

    ``held`` is the hold portfolio ``q_start + quote_sum``. Simulations
    accumulate it event by event alongside ``q_end_nofee`` so that a window
    with quotes only values both sides identically; when omitted it is
    computed from the two fields.
    """

    q_start: Vector
    q_end_nofee: Vector
    quote_sum: Vector
    fee_sum: Vector
    prices_end: Optional[Vector]
    spot_end: tuple
    trade_sum: Optional[Vector] = None
    held: Optional[Vector] = None

    @property
    def hold_quantities(self) -> Vector:
        if self.held is not None:
            return self.held
        return vadd(self.q_start, self.quote_sum)

    def check(self, tol: float = LEDGER_TOL) -> None:
        if self.trade_sum is None:
            return
        expect = vadd(vadd(self.q_start, self.quote_sum), self.trade_sum)
        for i, (a, b) in enumerate(zip(expect, self.q_end_nofee)):
            if abs(a - b) > tol * max(1.0, abs(a), abs(b)):
                raise InconsistentLedger(
                    f"asset {i + 1}: start + flows = {a!r} but end = {b!r}"
                )

    def valuation(self, numeraire: Numeraire) -> Vector:
        if numeraire.kind == "fiat":
            if self.prices_end is None:
                raise ValueError("FIAT valuation needs end-of-window prices")
            return tuple(self.prices_end)
        j = numeraire.j
        if j > len(self.q_start):
            raise ValueError(f"asset numeraire {j} outside a {len(self.q_start)}-asset pool")
        return tuple(row[j - 1] for row in self.spot_end)


@dataclass(frozen=True)
class MetricSnapshot:
    timestamp: int
    numeraire: Numeraire
    hold_value: float
    pool_value: float
    pool_value_with_fees: float
    il: float
    rv: float
    farv: float


def _values(ledger: WindowLedger, numeraire: Numeraire):
    v = ledger.valuation(numeraire)
    hold = dot(ledger.hold_quantities, v)
    pool = dot(ledger.q_end_nofee, v)
    with_fees = dot(vadd(ledger.q_end_nofee, ledger.fee_sum), v)
    return hold, pool, with_fees


def impermanent_loss(ledger: WindowLedger, numeraire: Numeraire = Numeraire()) -> float:
    ledger.check()
    hold, pool, _ = _values(ledger, numeraire)
    return hold - pool


def relative_value(
    ledger: WindowLedger, numeraire: Numeraire = Numeraire(), with_fees: bool = False
) -> float:
    ledger.check()
    hold, pool, with_fee = _values(ledger, numeraire)
    if not hold > 0:
        raise ZeroHoldValue("hold value is not positive")
    return (with_fee if with_fees else pool) / hold


def lp_relative_value(lp_ledger: WindowLedger, numeraire: Numeraire = Numeraire()) -> float:
    """Fee-adjusted relative value of a single LP's position; >= 1 is profitable."""
    return relative_value(lp_ledger, numeraire, with_fees=True)


def snapshot(ledger: WindowLedger, numeraire: Numeraire, timestamp: int = 0) -> MetricSnapshot:
    ledger.check()
    hold, pool, with_fees = _values(ledger, numeraire)
    if not hold > 0:
        raise ZeroHoldValue("hold value is not positive")
    return MetricSnapshot(
        timestamp, numeraire, hold, pool, with_fees, hold - pool, pool / hold, with_fees / hold
    )


# -- two-asset weighted pool profitability ------------------------------------

def profit_margin(q_x: float, weights: Sequence[float], fees: FeeParams, dq_x) -> np.ndarray:
    """Normalized LP profitability margin for inbound amounts ``dq_x``.

    Positive (or zero) margin with ``dq_x > 0`` means the single trade
    leaves LPs better off. Batched through the compiled kernel when built.
    """
    w_x, w_y = weights
    arr = np.atleast_1d(np.asarray(dq_x, dtype=np.float64))
    return kernels.cmmm_profit_margin(float(q_x), float(w_x), float(w_y),
                                      fees.gamma, fees.phi, arr)


def profitability_predicate(q_x: float, weights, fees: FeeParams) -> Callable[[float], bool]:
    def predicate(dq_x: float) -> bool:
        if not dq_x > 0:
            return False
        return bool(profit_margin(q_x, weights, fees, dq_x)[0] >= 0.0)

    return predicate


def closed_form_bound_fraction(weights, fees: FeeParams) -> Fraction:
    """Upper bound on ``dq_x / q_x`` for equal weights: ``gamma * (1 - phi)``.

    Inputs are converted through their shortest decimal repr so that e.g.
    ``0.0025`` becomes exactly 1/400.
    """
    w_x, w_y = weights
    if w_x != w_y:
        raise UnsupportedWeights("the closed form needs equal weights")
    g = Fraction(repr(fees.gamma))
    f = Fraction(repr(fees.phi))
    return g * (1 - f)


def quadratic_coefficients(gamma, phi, weight=Fraction(1, 2)):
    """Coefficients ``(a, b)`` of ``a*q_y*dq^2 + b*q_y*q_x*dq >= 0``, equal weights.

    Exact when given :class:`~fractions.Fraction` inputs.
    """
    lp_extra = gamma * (1 - phi) / (1 - gamma)
    gross = 1 + gamma / (1 - gamma)
    return -weight * gross, weight * lp_extra


def balancer_profitable_bound(
    q_x: float, weights: Sequence[float], fees: FeeParams, closed_form: bool = False
):
    """Largest profitable inbound trade and the profitability predicate.

    The bound is found by root solving the predicate's margin. With
    ``closed_form=True`` the equal-weight formula is used instead and
    :class:`UnsupportedWeights` is raised for other weights. A bound of
    0 means no trade is profitable.
    """
    w_x, w_y = (float(w) for w in weights)
    if not (0 < w_x < 1 and 0 < w_y < 1):
        raise UnsupportedWeights(f"weights must lie in (0, 1): {weights}")
    predicate = profitability_predicate(q_x, (w_x, w_y), fees)
    if closed_form:
        return float(closed_form_bound_fraction((w_x, w_y), fees)) * q_x, predicate

    def margin(d):
        return float(profit_margin(q_x, (w_x, w_y), fees, d)[0])

    if margin(0.0) <= 0.0:
        return 0.0, predicate
    hi = q_x * 1e-3
    for _ in range(200):
        if margin(hi) < 0:
            break
        hi *= 2
    else:  # pragma: no cover - margin eventually turns negative for fees < 1
        return math.inf, predicate
    bound = bracketed_root_solve(margin, 0.0, hi, rel_tol=1e-15)
    return bound, predicate


def trade_profitability_scan(pool, trade: TradeEvent) -> bool:
    """Would LPs gain from this single trade in isolation?

    Executes the trade on a copy of the uniform pool and compares the
    reserves plus LP fees with the starting reserves, both valued at the
    post-fee price (reserves including the whole fee, before the protocol
    share leaves). The solved asset is the numeraire.
    """
    from .uniform_pool import UniformPoolState, apply_trade

    if not isinstance(pool, UniformPoolState):
        raise UnsupportedSpec("the profitability scan needs a uniform pool")
    if all((d or 0.0) == 0.0 for d in trade.deltas):
        return False
    out = apply_trade(pool, trade)
    post_fee = vadd(pool.q, out.executed)
    y = trade.solve_for
    z_hat = [cfmm.spot_price(pool.spec, post_fee, i, y) for i in range(1, pool.n_assets + 1)]
    # numerator minus denominator of the fee-adjusted relative value
    gain = dot(vadd(out.fee_free, out.accrual.lp_fees), z_hat)
    return gain >= 0.0
