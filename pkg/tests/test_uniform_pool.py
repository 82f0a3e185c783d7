import math

import pytest
from hypothesis import assume, given, strategies as st

from cfmmsim import cfmm
from cfmmsim.cfmm import CfmmSpec
from cfmmsim.core import FeeParams, QuoteEvent, TradeEvent
from cfmmsim.errors import InsolventTrade, Overdraw, UnknownLp
from cfmmsim.uniform_pool import (
    UniformPoolState,
    apply_quote,
    apply_trade,
    lp_fee_share,
    lp_share,
    proportional_quote,
    seeded_pool,
    withdraw_all,
)
from conftest import rel_close

CPMM = CfmmSpec.constant_product()


def pool(q=(10.0, 10.0), gamma=0.0, phi=0.0, lp="A", spec=CPMM):
    return seeded_pool(spec, q, gamma, phi, lp)


class TestTrade:
    def test_fee_free(self):
        out = apply_trade(pool(), TradeEvent((10.0, None), 2))
        assert out.fee_free == (10.0, -5.0)
        assert out.executed == out.fee_free
        assert out.accrual.lp_fees == (0.0, 0.0)
        assert out.state.depth == 100.0
        assert out.state.q == out.state.q_nofee

    def test_gross_up_and_depth(self):
        out = apply_trade(pool(gamma=0.003), TradeEvent((10.0, None), 2))
        assert out.fee_free == (10.0, -5.0)
        assert out.executed[0] == pytest.approx(10.030090, abs=1e-6)
        assert out.accrual.lp_fees[0] == pytest.approx(0.030090, abs=1e-6)
        assert out.accrual.lp_fees[1] == 0
        assert out.gross_depth == pytest.approx(100.15045, abs=1e-5)
        assert out.gross_depth == pytest.approx((10 + 10 / 0.997) * 5, rel=1e-15)

    def test_protocol_split(self):
        out = apply_trade(pool(gamma=0.003, phi=0.1), TradeEvent((10.0, None), 2))
        assert out.accrual.lp_fees[0] == pytest.approx(0.027081, abs=1e-6)
        assert out.accrual.treasury_fees[0] == pytest.approx(0.003009, abs=1e-6)
        s = out.state
        # the protocol share leaves the reserves
        assert s.q[0] == pytest.approx(20 + out.accrual.lp_fees[0], rel=1e-15)
        assert s.treasury[0] == out.accrual.treasury_fees[0]
        assert s.depth == pytest.approx(cfmm.invariant(CPMM, s.q), rel=1e-12)

    def test_insolvent(self):
        with pytest.raises(InsolventTrade):
            apply_trade(pool(), TradeEvent((None, -10.0), 1))

    def test_empty_pool(self):
        with pytest.raises(InsolventTrade):
            apply_trade(UniformPoolState.empty(CPMM), TradeEvent((1.0, None), 2))


class TestQuote:
    def test_sole_lp(self):
        assert pool().lp_shares == {"A": 1.0}

    def test_symmetric_join(self):
        s = apply_quote(pool(), QuoteEvent((10.0, 10.0), "B"))
        assert s.lp_shares == {"A": 0.5, "B": 0.5}
        assert s.depth == 400

    def test_partial_withdrawal(self):
        s = apply_quote(pool(), QuoteEvent((10.0, 10.0), "B"))
        s = apply_quote(s, QuoteEvent((-5.0, -5.0), "A"))
        assert s.lp_shares["A"] == pytest.approx(1 / 3, rel=1e-15)
        assert s.lp_shares["B"] == pytest.approx(2 / 3, rel=1e-15)

    def test_withdrawing_the_whole_share_exits(self):
        s = apply_quote(pool(), QuoteEvent((10.0, 10.0), "B"))
        s = apply_quote(s, QuoteEvent((-10.0, -10.0), "A"))
        assert s.lp_shares == {"B": 1.0}
        assert s.q == (10.0, 10.0)

    def test_last_lp_empties_pool(self):
        s = apply_quote(pool(), QuoteEvent((-10.0, -10.0), "A"))
        assert s.is_empty and s.q == (0.0, 0.0) and s.depth == 0.0

    def test_overdraw(self):
        s = apply_quote(pool(), QuoteEvent((10.0, 10.0), "B"))
        with pytest.raises(Overdraw):
            apply_quote(s, QuoteEvent((-11.0, -11.0), "A"))

    def test_unknown_lp(self):
        with pytest.raises(UnknownLp):
            apply_quote(pool(), QuoteEvent((-1.0, -1.0), "Z"))

    def test_withdraw_all_helper(self):
        s = apply_quote(pool(), QuoteEvent((30.0, 30.0), "B"))
        s = apply_quote(s, withdraw_all(s, "A"))
        assert set(s.lp_shares) == {"B"}
        assert s.q == pytest.approx((30.0, 30.0), rel=1e-12)


class TestFeeShare:
    def test_single_lp(self):
        s = pool(gamma=0.01)
        s = apply_trade(s, TradeEvent((1.0, None), 2)).state
        assert lp_fee_share(s, "A") == s.cumulative_lp_fees

    def test_two_equal(self):
        s = apply_quote(pool(gamma=0.01), QuoteEvent((10.0, 10.0), "B"))
        s = apply_trade(s, TradeEvent((1.0, None), 2)).state
        s = apply_trade(s, TradeEvent((None, 2.0), 1)).state
        a, b = lp_fee_share(s, "A"), lp_fee_share(s, "B")
        assert a == pytest.approx(b, rel=1e-12)
        assert a[0] == pytest.approx(s.cumulative_lp_fees[0] / 2, rel=1e-12)

    def test_quarter_split(self):
        s = apply_quote(pool(gamma=0.01), QuoteEvent((30.0, 30.0), "B"))
        assert lp_share(s, "A") == pytest.approx(0.25)
        s = apply_trade(s, TradeEvent((4.0, None), 2)).state
        lam = s.cumulative_lp_fees
        assert lp_fee_share(s, "A")[0] == pytest.approx(0.25 * lam[0], rel=1e-12)
        assert lp_fee_share(s, "B")[0] == pytest.approx(0.75 * lam[0], rel=1e-12)

    def test_unknown(self):
        with pytest.raises(UnknownLp):
            lp_fee_share(pool(), "nobody")


# -- properties --------------------------------------------------------------

fee = st.floats(0.0, 0.05)
share = st.floats(0.0, 1.0)
step = st.tuples(st.booleans(), st.floats(-0.5, 2.0).filter(lambda x: abs(x) > 1e-6),
                 st.integers(0, 2))


def run_events(gamma, phi, steps):
    s = pool((50.0, 80.0), gamma, phi)
    for is_trade, size, who in steps:
        if is_trade:
            if size == 0:
                continue
            s = apply_trade(s, TradeEvent((s.q[0] * size * 0.3, None), 2)).state
        else:
            lp = "ABC"[who]
            alpha = size if size > 0 else max(size, -0.5) * s.lp_shares.get(lp, 0.0)
            if alpha == 0:
                continue
            s = apply_quote(s, proportional_quote(s, alpha, lp))
        yield s


@given(fee, share, st.lists(step, max_size=12))
def test_shares_normalized(gamma, phi, steps):
    for s in run_events(gamma, phi, steps):
        assert abs(math.fsum(s.lp_shares.values()) - 1) <= 1e-12


@given(fee, share, st.lists(step, max_size=12))
def test_live_reserves_cover_shadow(gamma, phi, steps):
    for s in run_events(gamma, phi, steps):
        assert all(a >= b - 1e-12 * max(1.0, b) for a, b in zip(s.q, s.q_nofee))
        assert rel_close(s.depth, cfmm.invariant(CPMM, s.q), 1e-12)


@given(share, st.lists(step, max_size=12))
def test_no_fee_no_shadow_gap(phi, steps):
    for s in run_events(0.0, phi, steps):
        assert all(rel_close(a, b, 1e-12) or abs(a - b) <= 1e-12 for a, b in zip(s.q, s.q_nofee))


@given(st.floats(1e-4, 0.2), share, st.floats(-0.9, 3.0).filter(lambda x: abs(x) > 1e-6))
def test_trade_fee_conservation(gamma, phi, frac):
    s = pool((40.0, 60.0), gamma, phi)
    s = apply_quote(s, QuoteEvent((20.0, 30.0), "B"))
    out = apply_trade(s, TradeEvent((40.0 * frac, None), 2))
    x_plus = [max(d, 0.0) for d in out.executed]
    for a in range(2):
        total = out.accrual.lp_fees[a] + out.accrual.treasury_fees[a]
        assert abs(total - gamma * x_plus[a]) <= 1e-12 * max(1.0, x_plus[a])
        per_lp = math.fsum(v[a] for v in out.state.lp_fees.values())
        assert abs(per_lp - out.accrual.lp_fees[a]) <= 1e-12 * max(1.0, out.accrual.lp_fees[a])


@given(st.floats(1e-4, 0.2), st.floats(0.0, 0.999), st.floats(-0.9, 3.0).filter(lambda x: abs(x) > 1e-6))
def test_fees_deepen_pool(gamma, phi, frac):
    s = pool((40.0, 60.0), gamma, phi)
    out = apply_trade(s, TradeEvent((40.0 * frac, None), 2))
    assert out.gross_depth > s.depth
    assert out.state.depth > s.depth


@given(st.floats(-0.9, 5.0).filter(lambda x: abs(x) > 1e-9), st.floats(0.01, 100), st.floats(0.01, 100))
def test_quote_keeps_prices(alpha, a, b):
    for spec in (CPMM, CfmmSpec.constant_mean((0.3, 0.7))):
        s = pool((a, b), spec=spec)
        t = apply_quote(s, QuoteEvent((alpha * a, alpha * b), "B" if alpha > 0 else "A"))
        assert rel_close(t.spot_price(1, 2), s.spot_price(1, 2), 1e-12)
