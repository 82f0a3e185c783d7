"""Command-line front end: ``cfmmsim {simulate,equilibrate,profit-region,validate}``."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__, arbitrage, replay
from .cfmm import CONSTANT_MEAN, CONSTANT_PRODUCT, CfmmSpec
from .core import FeeParams
from .errors import CfmmError
from .metrics import (
    Numeraire,
    balancer_profitable_bound,
    closed_form_bound_fraction,
)
from .uniform_pool import UniformPoolState, apply_trade


def _floats(text: str):
    try:
        return tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}")


def _numeraires(text: str):
    try:
        return tuple(Numeraire.parse(t) for t in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad numeraire list: {text!r}")


def _g(x: float) -> str:
    return format(x, ".12g")


def _vec(v) -> str:
    return "(" + ", ".join(_g(x) for x in v) + ")"


def _emit(rows, fmt: str, out) -> None:
    """Print ``(key, value)`` rows as aligned text or delimited records."""
    if fmt == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(("key", "value"))
        w.writerows(rows)
        return
    for key, value in rows:
        out.write(f"{key}: {value}\n" if key else f"{value}\n")


# -- simulate ----------------------------------------------------------------

def cmd_simulate(args, out) -> int:
    overrides = {
        "events": args.events,
        "prices": args.prices,
        "sampling_period": args.sampling_period,
        "start_time": args.start_time,
        "equilibrate_each_price_update": args.equilibrate,
        "equilibration_mode": args.equilibration_mode,
        "numeraires": args.numeraires,
        "on_error": args.on_error,
        "output": args.output,
        "report": args.report,
    }
    cfg = replay.load_config(args.config, overrides)
    result = replay.run_simulation(cfg)
    if cfg.output is not None:
        replay.export_series(result.series, cfg.output, args.delimiter)
    if cfg.report is not None:
        replay.write_report(result.report, cfg.report)

    rep = result.report
    rows = [
        ("events_total", rep["events_total"]),
        ("events_applied", rep["events_applied"]),
        ("events_rejected", rep["events_rejected"]),
        ("injected_trades", rep["injected_trades"]),
        ("samples", len(result.series)),
        ("total_lp_fees", _vec(rep["total_lp_fees"])),
        ("treasury_fees", _vec(rep["treasury_fees"])),
    ]
    for label, m in rep["final_metrics"].items():
        if "error" in m:
            rows.append((f"{label}.error", m["error"]))
            continue
        rows += [(f"{label}.il", _g(m["il"])), (f"{label}.rv", _g(m["rv"])),
                 (f"{label}.farv", _g(m["farv"]))]
    for lp, entry in rep["lps"].items():
        for key, value in entry.items():
            if key == "fees":
                value = _vec(value)
            elif value is not None:
                value = _g(value)
            rows.append((f"lp.{lp}.{key}", value))
    if cfg.output is not None:
        rows.append(("output", str(cfg.output)))
    _emit(rows, args.format, out)
    return 0


# -- equilibrate ---------------------------------------------------------------

def _spec(kind: str, weights):
    if kind == CONSTANT_PRODUCT:
        return CfmmSpec.constant_product()
    if weights is None:
        raise ValueError("--weights is required for a constant-mean pool")
    return CfmmSpec.constant_mean(weights)


def cmd_equilibrate(args, out) -> int:
    spec = _spec(args.kind, args.weights)
    prices = arbitrage.check_prices(args.prices)
    if len(args.quantities) != spec.n_assets or len(prices) != spec.n_assets:
        raise ValueError(f"need {spec.n_assets} quantities and prices")
    pool = UniformPoolState.seeded(spec, args.quantities, FeeParams(args.gamma, args.phi))
    report = arbitrage.pool_report(pool, prices)
    rows = [(f"delta[{i + 1}]", _vec(row)) for i, row in enumerate(report.specific)]
    trade = arbitrage.equilibrate(pool, prices, args.mode)
    if trade is None:
        rows.append(("", "no arbitrage"))
        rows.append(("trade", "()"))
    else:
        outcome = apply_trade(pool, trade)
        after = outcome.state
        rows += [
            ("trade", _vec(outcome.fee_free)),
            ("executed", _vec(outcome.executed)),
            ("solve_for", trade.solve_for),
            ("quantities", _vec(after.q)),
        ]
        rows += [(f"price[{i + 1}]", _vec(row)) for i, row in enumerate(after.price_matrix())]
        rows.append(("max_deviation", _g(arbitrage.pool_report(after, prices).max_deviation)))
    _emit(rows, args.format, out)
    return 0


# -- profit-region -------------------------------------------------------------

def _fraction_text(fr: Fraction) -> str:
    return str(fr.numerator) if fr.denominator == 1 else f"{fr.numerator}/{fr.denominator}"


def cmd_profit_region(args, out) -> int:
    if len(args.weights) != 2:
        raise ValueError("profit-region needs two weights")
    if not args.q_x > 0:
        raise ValueError("--q-x must be positive")
    fees = FeeParams(args.gamma, args.phi)
    bound, _ = balancer_profitable_bound(args.q_x, args.weights, fees)
    rows = []
    if bound == 0.0:
        rows.append(("", "no profitable trades"))
        rows.append(("bound", "0"))
    elif args.weights[0] == args.weights[1] and not args.numeric:
        frac = closed_form_bound_fraction(args.weights, fees)
        exact = frac * Fraction(repr(args.q_x))
        rows.append(("region", f"0 < Δq_x ≤ ({_fraction_text(frac)})·q_x"))
        rows.append(("", f"Δq_x ≤ {_g(float(exact))}"))
        rows.append(("bound", _g(float(exact))))
    else:
        rows.append(("", f"Δq_x ≤ {_g(bound)}"))
        rows.append(("bound", _g(bound)))
    _emit(rows, args.format, out)
    return 0


# -- validate -------------------------------------------------------------------

def cmd_validate(args, out) -> int:
    records = replay.load_event_log(args.log, args.n_assets)
    counts = {k: 0 for k in replay.KINDS}
    for r in records:
        counts[r.kind] += 1
    rows = [("records", len(records))] + [(k, counts[k]) for k in replay.KINDS]
    if records:
        rows += [("first_timestamp", records[0].timestamp),
                 ("last_timestamp", records[-1].timestamp)]
    _emit(rows, args.format, out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfmmsim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def fmt(p):
        p.add_argument("--format", choices=("plain", "csv"), default="plain")

    p = sub.add_parser("simulate", help="replay an event log and export metrics")
    p.add_argument("config", type=Path)
    p.add_argument("--events", type=Path)
    p.add_argument("--prices", type=Path)
    p.add_argument("--sampling-period", type=int)
    p.add_argument("--start-time", type=int)
    p.add_argument("--equilibrate", action=argparse.BooleanOptionalAction, default=None,
                   help="inject an arbitrage trade at each price update")
    p.add_argument("--equilibration-mode", choices=(arbitrage.FEE_FREE, arbitrage.FEE_AWARE))
    p.add_argument("--numeraires", type=_numeraires, help="e.g. fiat,asset1,asset2")
    p.add_argument("--on-error", choices=("reject", "abort"))
    p.add_argument("--output", type=Path)
    p.add_argument("--report", type=Path)
    p.add_argument("--delimiter", default=",")
    fmt(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("equilibrate", help="arbitrage trade for a uniform pool")
    p.add_argument("--kind", choices=(CONSTANT_PRODUCT, CONSTANT_MEAN), default=CONSTANT_PRODUCT)
    p.add_argument("--weights", type=_floats)
    p.add_argument("--quantities", type=_floats, required=True)
    p.add_argument("--prices", type=_floats, required=True)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--mode", choices=(arbitrage.FEE_FREE, arbitrage.FEE_AWARE),
                   default=arbitrage.FEE_FREE)
    fmt(p)
    p.set_defaults(func=cmd_equilibrate)

    p = sub.add_parser("profit-region", help="profitable trade sizes of a weighted pool")
    p.add_argument("--weights", type=_floats, default=(0.5, 0.5))
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--q-x", type=float, required=True)
    p.add_argument("--numeric", action="store_true", help="skip the closed form")
    fmt(p)
    p.set_defaults(func=cmd_profit_region)

    p = sub.add_parser("validate", help="parse and check an event log")
    p.add_argument("log", type=Path)
    p.add_argument("--n-assets", type=int)
    fmt(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None, out=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    out = out or sys.stdout
    buf = io.StringIO()
    try:
        code = args.func(args, buf)
    except (CfmmError, ValueError, OSError) as exc:
        print(f"cfmmsim: error: {exc}", file=sys.stderr)
        return 1
    out.write(buf.getvalue())
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
