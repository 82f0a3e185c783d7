"""Acceptance criteria 1-10, one test each.

Every test prints a single ``criterion N: PASS|FAIL ...`` line (shown even
without ``-s``) and then asserts. Tolerances are pinned as module constants.
Randomized criteria use a fixed numpy seed so the run is reproducible.
"""

import math
import time

import numpy as np
import pytest
import sympy as sp

from cfmmsim import cfmm, replay
from cfmmsim.arbitrage import equilibrate, pool_report
from cfmmsim.cfmm import CfmmSpec
from cfmmsim.concentrated_pool import (
    ConcentratedPoolState,
    TickGrid,
    apply_quote as cl_apply_quote,
    execute_trade,
    quote_for_liquidity,
)
from cfmmsim.core import FeeParams, QuoteEvent, TradeEvent, vadd
from cfmmsim.errors import LiquidityExhausted
from cfmmsim.metrics import (
    Numeraire,
    WindowLedger,
    balancer_profitable_bound,
    impermanent_loss,
    quadratic_coefficients,
    relative_value,
    trade_profitability_scan,
)
from cfmmsim.uniform_pool import apply_quote, apply_trade, seeded_pool

RV_TOL = 1e-9            # 1
RV_RUNTIME = 1.0
IL_FLOOR = -1e-12        # 2
IL_RUNTIME = 10.0
BOUND_REL = 1e-9         # 4
CL_TOL = 1e-9            # 5
SOLVENCY_TOL = 1e-9      # 6
FEE_TOL = 1e-12          # 7
PBC_TOL = 1e-9           # 8
DEPTH_TOL = 1e-12
FD_STEP = 1e-8           # 9
FD_REL = 1e-4

CPMM = CfmmSpec.constant_product()
FIAT = Numeraire.fiat()


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, detail
    return emit


def random_weights(rng, n):
    w = rng.uniform(0.05, 1.0, n)
    w = list(w / w.sum())
    w[-1] = 1 - math.fsum(w[:-1])
    return w


def test_c01_closed_form_rv(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    for r in (0.25, 0.5, 2, 4, 9):
        pool = seeded_pool(CPMM, (10.0, 10.0))  # equilibrated at p = (1, 1)
        out = apply_trade(pool, equilibrate(pool, (r, 1.0)))
        s = out.state
        led = WindowLedger((10.0, 10.0), s.q_nofee, (0.0, 0.0), (0.0, 0.0), (r, 1.0),
                           s.price_matrix(), trade_sum=out.fee_free)
        got = relative_value(led, FIAT)
        worst = max(worst, abs(got - 2 * math.sqrt(r) / (1 + r)))
        if r == 4:
            assert abs(got - 0.8) <= RV_TOL
    elapsed = time.perf_counter() - t0
    verdict(1, worst <= RV_TOL and elapsed < RV_RUNTIME,
            f"max |V_p - 2sqrt(r)/(1+r)| = {worst:.2e} (tol {RV_TOL}), {elapsed:.3f}s")


def test_c02_il_non_negative(verdict):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = math.inf
    for case in range(1000):
        if case % 2:
            spec = CfmmSpec.constant_mean(random_weights(rng, int(rng.integers(2, 5))))
        else:
            spec = CPMM
        n = spec.n_assets
        q0 = tuple(rng.uniform(1.0, 100.0, n))
        pool = seeded_pool(spec, q0)
        flows = (0.0,) * n
        for _ in range(int(rng.integers(1, 8))):
            k = int(rng.integers(1, n + 1))
            i = int(rng.choice([a for a in range(1, n + 1) if a != k]))
            deltas = [0.0] * n
            deltas[k - 1] = None
            deltas[i - 1] = pool.q[i - 1] * rng.uniform(-0.5, 1.0)
            out = apply_trade(pool, TradeEvent(tuple(deltas), k))
            pool, flows = out.state, vadd(flows, out.fee_free)
        p = tuple(rng.uniform(0.1, 10.0, n))
        trade = equilibrate(pool, p)
        if trade is not None:
            out = apply_trade(pool, trade)
            pool, flows = out.state, vadd(flows, out.fee_free)
        led = WindowLedger(q0, pool.q_nofee, (0.0,) * n, (0.0,) * n, p,
                           pool.price_matrix(), trade_sum=flows)
        for nm in (FIAT,) + tuple(Numeraire.asset(j) for j in range(1, n + 1)):
            worst = min(worst, impermanent_loss(led, nm))
    elapsed = time.perf_counter() - t0
    verdict(2, worst >= IL_FLOOR and elapsed < IL_RUNTIME,
            f"min IL over 1000 windows x all numeraires = {worst:.2e} "
            f"(floor {IL_FLOOR}), {elapsed:.2f}s")


def test_c03_quote_neutrality(verdict):
    rng = np.random.default_rng(3)
    samples = 0
    bad = 0
    for case in range(100):
        weights = random_weights(rng, 2) if case % 2 else None
        q0 = tuple(float(x) for x in np.round(rng.uniform(1, 100, 2), 3))
        prices0 = tuple(float(x) for x in np.round(rng.uniform(0.5, 5, 2), 3))
        cfg = replay.SimulationConfig(
            kind="constant_mean" if weights else "constant_product", weights=weights,
            gamma=float(rng.uniform(0, 0.01)), phi=float(rng.uniform(0, 1)),
            lps=(replay.LpSpec("genesis", q0),), initial_prices=prices0,
            sampling_period=int(rng.integers(5, 60)),
        )
        ratio = q0[1] / q0[0]
        events = []
        for t in sorted(rng.integers(0, 600, int(rng.integers(1, 20)))):
            t = int(t)
            if rng.random() < 0.3:
                events.append(replay.price_record(t, rng.uniform(0.1, 10, 2)))
                continue
            a = float(rng.uniform(-0.2, 1.0)) * q0[0]
            lp = "genesis" if a < 0 else f"lp{int(rng.integers(0, 4))}"
            events.append(replay.EventRecord(t, "quote", QuoteEvent((a, a * ratio), lp, t)))
        res = replay.run_simulation(cfg, events)
        for s in res.series:
            samples += 1
            bad += not (s.rv == 1.0 and s.farv == 1.0)
    verdict(3, bad == 0 and samples > 0,
            f"{samples - bad}/{samples} snapshots with RV = FARV = 1 exactly over 100 logs")


def test_c04_balancer_region(verdict):
    fees = FeeParams(0.0025, 0.1)
    worst = 0.0
    for q_x in (1.0, 1e3, 1e6):
        bound, _ = balancer_profitable_bound(q_x, (0.5, 0.5), fees)
        worst = max(worst, abs(bound / (9 / 4000 * q_x) - 1))

    # coefficients by substitution into the full inequality, divided by w_y q_y
    q_x, q_y, d = sp.symbols("q_x q_y d", positive=True)
    g, phi, w = sp.Rational(1, 400), sp.Rational(1, 10), sp.Rational(1, 2)
    lhs = (d * w * q_y * q_x * (1 + g * (1 - phi) / (1 - g))
           + q_y * w * (q_x + d + g * d / (1 - g)) * (q_x - (q_x + d)))
    poly = sp.Poly(sp.expand(lhs / q_y), d)
    coeffs = (poly.coeff_monomial(d ** 2), sp.simplify(poly.coeff_monomial(d) / q_x))
    expected = (sp.Rational(-200, 399), sp.Rational(3, 2660))
    ours = quadratic_coefficients(sp.Rational(1, 400), sp.Rational(1, 10))
    coeff_ok = coeffs == expected and tuple(sp.Rational(x) for x in ours) == expected

    # predicate vs direct single-trade FARV on a fresh one-LP pool
    qx, qy = 1000.0, 1700.0
    bound, predicate = balancer_profitable_bound(qx, (0.5, 0.5), fees)
    pool = seeded_pool(CfmmSpec.constant_mean((0.5, 0.5)), (qx, qy), 0.0025, 0.1)
    mismatches = 0
    for m in range(1000):
        dq = (m + 0.5) / 250 * bound  # [0, 4 x bound], never on the bound itself
        trade = TradeEvent((dq, None), 2)
        out = apply_trade(pool, trade)
        z_hat = cfmm.price_matrix(pool.spec, vadd(pool.q, out.executed))
        led = WindowLedger((qx, qy), vadd((qx, qy), out.fee_free), (0.0, 0.0),
                           out.accrual.lp_fees, None, z_hat, trade_sum=out.fee_free)
        farv_ok = relative_value(led, Numeraire.asset(2), with_fees=True) >= 1.0
        scan_ok = trade_profitability_scan(pool, trade)
        mismatches += not (predicate(dq) == farv_ok == scan_ok)
    ok = worst <= BOUND_REL and coeff_ok and mismatches == 0
    verdict(4, ok, f"bound rel err {worst:.1e} (tol {BOUND_REL}); coefficients "
                   f"{coeffs[0]}, {coeffs[1]}; {mismatches}/1000 predicate mismatches")


TICKS = tuple(0.25 * 2 ** (n / 4) for n in range(25))  # 0.25 .. 16


def cl_runs():
    """Criterion 5's 100 trades, shared with criterion 6."""
    rng = np.random.default_rng(5)
    runs = []
    for _ in range(100):
        L = float(rng.uniform(1.0, 1e4))
        price = float(rng.uniform(0.3, 15.0))
        pool = ConcentratedPoolState.create(TickGrid.from_ticks(TICKS), price, FeeParams())
        pool = cl_apply_quote(pool, quote_for_liquidity(pool, "A", TICKS[0], TICKS[-1], L)).state
        target = float(rng.uniform(0.26, 15.9))
        if rng.random() < 0.5:
            trade = TradeEvent((L / math.sqrt(target) - L / pool.sqrt_price, None), 2)
        else:
            trade = TradeEvent((None, L * math.sqrt(target) - L * pool.sqrt_price), 1)
        runs.append((pool, L, trade, execute_trade(pool, trade)))
    return runs


@pytest.fixture(scope="module")
def cl_results():
    return cl_runs()


def test_c05_cl_uniform_equivalence(verdict, cl_results):
    worst = 0.0
    multi = 0
    for pool, L, trade, out in cl_results:
        virt = (L / pool.sqrt_price, L * pool.sqrt_price)
        k = trade.solve_for
        ref = cfmm.solve_trade(CPMM, virt, trade.deltas, k)
        worst = max(worst, abs(out.fee_free[k - 1] - ref) / max(1.0, abs(ref)))
        multi += len(out.segments) > 2
    verdict(5, worst <= CL_TOL and multi > 0,
            f"max rel diff {worst:.2e} (tol {CL_TOL}); {multi}/100 trades cross 2+ ticks")


def test_c06_tick_solvency(verdict, cl_results):
    crossings = 0
    worst = 0.0
    for _, _, _, out in cl_results:
        for seg in out.segments:
            if seg.crossed:
                crossings += 1
                worst = max(worst, seg.depleted_residual)
    verdict(6, worst <= SOLVENCY_TOL and crossings > 0,
            f"max depleted reserve {worst:.2e} over {crossings} crossings (tol {SOLVENCY_TOL})")


def test_c07_fee_conservation(verdict):
    rng = np.random.default_rng(7)
    worst_total = worst_split = 0.0

    def rel(a, b):
        return abs(a - b) / max(1.0, abs(b))

    for case in range(50):
        gamma, phi = float(rng.uniform(1e-4, 0.05)), float(rng.uniform(0, 1))
        x_plus = [0.0, 0.0]
        if case % 2:
            pool = seeded_pool(CPMM, tuple(rng.uniform(10, 100, 2)), gamma, phi, "A")
            for _ in range(30):
                if rng.random() < 0.2:
                    lp = f"lp{int(rng.integers(0, 3))}"
                    a = float(rng.uniform(0.1, 5.0))
                    pool = apply_quote(pool, QuoteEvent((a, a * pool.q[1] / pool.q[0]), lp))
                    continue
                i = int(rng.integers(0, 2))
                d = [None, None]
                d[i] = pool.q[i] * float(rng.uniform(-0.3, 0.5))
                out = apply_trade(pool, TradeEvent(tuple(d), 2 - i))
                pool = out.state
                x_plus = [x + max(e, 0.0) for x, e in zip(x_plus, out.executed)]
            lp_total, treasury = pool.cumulative_lp_fees, pool.treasury
            per_lp = [math.fsum(f[a] for f in pool.lp_fees.values()) for a in range(2)]
        else:
            fees = FeeParams(gamma, phi)
            pool = ConcentratedPoolState.create(TickGrid.from_ticks(TICKS), 1.3, fees)
            for lp, lo, hi, L in (("A", 0, 24, 50.0), ("B", 4, 14, 80.0), ("C", 8, 16, 20.0)):
                pool = cl_apply_quote(pool, quote_for_liquidity(
                    pool, lp, TICKS[lo], TICKS[hi], L)).state
            lp_total, treasury, per_lp = [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]
            for _ in range(30):
                target = float(rng.uniform(0.4, 10.0))
                if rng.random() < 0.5:
                    d = (50 / math.sqrt(target) - 50 / pool.sqrt_price, None)
                    trade = TradeEvent(d, 2)
                else:
                    trade = TradeEvent((None, 50 * math.sqrt(target) - 50 * pool.sqrt_price), 1)
                try:
                    out = execute_trade(pool, trade)
                except LiquidityExhausted:
                    continue
                pool = out.state
                x_plus = [x + max(e, 0.0) for x, e in zip(x_plus, out.executed)]
                lp_total = vadd(lp_total, out.accrual.lp_fees)
                treasury = vadd(treasury, out.accrual.treasury_fees)
                per_lp = [p + math.fsum(f[a] for f in out.lp_fees.values())
                          for a, p in enumerate(per_lp)]
        for a in range(2):
            worst_total = max(worst_total, rel(lp_total[a] + treasury[a], gamma * x_plus[a]))
            worst_split = max(worst_split, rel(per_lp[a], lp_total[a]))
    verdict(7, worst_total <= FEE_TOL and worst_split <= FEE_TOL,
            f"|lp + treasury - gamma X+| {worst_total:.1e}, |sum per-LP - lambda| "
            f"{worst_split:.1e} (tol {FEE_TOL}) over 50 replays")


def test_c08_equilibration(verdict):
    rng = np.random.default_rng(8)
    worst_dev = worst_depth = 0.0
    second = 0
    for case in range(500):
        n = 2 if case % 3 else int(rng.integers(3, 5))
        spec = CPMM if (case % 2 and n == 2) else CfmmSpec.constant_mean(random_weights(rng, n))
        q = tuple(rng.uniform(1.0, 1e3, n))
        pool = seeded_pool(spec, q)
        # external prices within 10x of the pool's own
        p = tuple(pool.spot_price(i, n) * rng.uniform(0.1, 10.0) for i in range(1, n + 1))
        trade = equilibrate(pool, p)
        if trade is None:
            continue
        after = apply_trade(pool, trade).state
        worst_dev = max(worst_dev, pool_report(after, p).max_deviation)
        second += equilibrate(after, p) is not None
        k0, k1 = cfmm.invariant(spec, q), cfmm.invariant(spec, after.q)
        worst_depth = max(worst_depth, abs(k1 / k0 - 1))
    verdict(8, worst_dev <= PBC_TOL and second == 0 and worst_depth <= DEPTH_TOL,
            f"max |Z - p_i/p_j| {worst_dev:.1e} (tol {PBC_TOL}); {second} repeat trades; "
            f"invariant drift {worst_depth:.1e} (tol {DEPTH_TOL})")


def test_c09_spot_price_derivative(verdict):
    rng = np.random.default_rng(9)
    worst = 0.0
    for case in range(1000):
        if case % 2:
            spec = CPMM
        else:
            spec = CfmmSpec.constant_mean(random_weights(rng, int(rng.integers(2, 5))))
        n = spec.n_assets
        q = tuple(rng.uniform(1e-2, 1e4, n))
        i, j = (int(x) + 1 for x in rng.choice(n, 2, replace=False))
        h = FD_STEP * q[i - 1]
        given = [0.0] * n
        given[i - 1] = h
        given[j - 1] = None
        dq_j = cfmm.solve_trade(spec, q, tuple(given), j)
        z_fd = -dq_j / h
        z = cfmm.spot_price(spec, q, i, j)
        worst = max(worst, abs(z_fd / z - 1))
    verdict(9, worst <= FD_REL,
            f"max rel diff {worst:.1e} (tol {FD_REL}) on 1000 states, step {FD_STEP}")


def test_c10_replay_determinism(verdict, tmp_path):
    from test_replay import make_config, price, quote, trade

    events = [trade(t, ["0.37", None] if t % 3 else [None, "0.21"]) for t in range(0, 900, 7)]
    events.insert(10, quote(70, "bob", ["0", "0"]))
    path = make_config(tmp_path, events,
                       [price(t, [str(1 + 0.01 * t), "1"]) for t in range(0, 900, 45)],
                       equilibrate_each_price_update="true", report="out/r.json")
    outputs = []
    for _ in range(2):
        cfg = replay.load_config(path)
        res = replay.run_simulation(cfg)
        replay.export_series(res.series, cfg.output)
        replay.write_report(res.report, cfg.report)
        outputs.append((cfg.output.read_bytes(), cfg.report.read_bytes()))
    same = outputs[0] == outputs[1]
    verdict(10, same and len(outputs[0][0]) > 0,
            f"series {len(outputs[0][0])} bytes and report identical across two runs")
