"""Event-log replay, metric sampling and series export.

Event logs are UTF-8 JSON Lines, one record per line, ``kind`` first::

    {"kind": "quote", "timestamp": 0, "lp": "A", "deltas": ["10", "10"]}
    {"kind": "trade", "timestamp": 5, "deltas": ["1.5", null], "solve_for": 2}
    {"kind": "price_update", "timestamp": 9, "prices": ["4", "1"]}

Quantities are decimal strings (numbers are accepted too). Arrays are
0-based; ``solve_for`` is the 1-based asset index of the ``null`` leg and
may be omitted. Concentrated-pool quotes add ``"range": ["lower", "upper"]``.
Blank lines and lines starting with ``#`` are skipped.
"""

from __future__ import annotations

import configparser
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

from . import arbitrage, concentrated_pool, uniform_pool
from .cfmm import CONSTANT_MEAN, CONSTANT_PRODUCT, CfmmSpec
from .concentrated_pool import ConcentratedPoolState, TickGrid
from .core import FeeParams, QuoteEvent, TradeEvent, vadd, vsub, zeros
from .errors import (
    CfmmError,
    ConfigError,
    DimensionMismatch,
    LiquidityExhausted,
    NonMonotoneTimestamps,
    ParseError,
    SimulationError,
)
from .metrics import MetricSnapshot, Numeraire, WindowLedger, snapshot

log = logging.getLogger(__name__)

TRADE = "trade"
QUOTE = "quote"
PRICE_UPDATE = "price_update"
KINDS = (TRADE, QUOTE, PRICE_UPDATE)

SERIES_HEADER = (
    "timestamp", "numeraire", "hold_value", "pool_value",
    "pool_value_with_fees", "il", "rv", "farv",
)


@dataclass(frozen=True)
class EventRecord:
    timestamp: int
    kind: str
    payload: object  # TradeEvent | QuoteEvent | tuple of prices
    line: int = 0


# -- event log ---------------------------------------------------------------

def _decimal(value, line, what) -> float:
    if isinstance(value, bool) or not isinstance(value, (str, int, float)):
        raise ParseError(f"{what} must be a decimal string, got {value!r}", line)
    try:
        out = float(value)
    except ValueError:
        raise ParseError(f"{what} is not a number: {value!r}", line) from None
    if not math.isfinite(out):
        raise ParseError(f"{what} is not finite: {value!r}", line)
    return out


def parse_record(text: str, line: int = 0, n_assets: Optional[int] = None) -> EventRecord:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", line) from None
    if not isinstance(obj, dict) or not obj:
        raise ParseError("a record must be a JSON object", line)
    if next(iter(obj)) != "kind":
        raise ParseError("the first field must be 'kind'", line)
    kind = obj["kind"]
    if kind not in KINDS:
        raise ParseError(f"unknown kind {kind!r}", line)
    ts = obj.get("timestamp")
    if isinstance(ts, bool) or not isinstance(ts, int):
        raise ParseError("timestamp must be an integer", line)

    def legs(key):
        vals = obj.get(key)
        if not isinstance(vals, list) or not vals:
            raise ParseError(f"'{key}' must be a non-empty list", line)
        if n_assets is not None and len(vals) != n_assets:
            raise DimensionMismatch(
                f"line {line}: {len(vals)} components for a {n_assets}-asset pool"
            )
        return vals

    if kind == TRADE:
        raw = legs("deltas")
        nulls = [i for i, v in enumerate(raw) if v is None]
        if len(nulls) != 1:
            raise ParseError("a trade needs exactly one null (solved) leg", line)
        k = obj.get("solve_for", nulls[0] + 1)
        if k != nulls[0] + 1:
            raise ParseError("solve_for must point at the null leg", line)
        deltas = tuple(
            None if v is None else _decimal(v, line, f"deltas[{i}]")
            for i, v in enumerate(raw)
        )
        payload = TradeEvent(deltas, k, ts)
    elif kind == QUOTE:
        lp = obj.get("lp")
        if not isinstance(lp, str) or not lp:
            raise ParseError("a quote needs an 'lp' identifier", line)
        deltas = tuple(_decimal(v, line, f"deltas[{i}]") for i, v in enumerate(legs("deltas")))
        rng = obj.get("range")
        if rng is not None:
            if not isinstance(rng, list) or len(rng) != 2:
                raise ParseError("'range' must be [lower, upper]", line)
            rng = (_decimal(rng[0], line, "range[0]"), _decimal(rng[1], line, "range[1]"))
        payload = QuoteEvent(deltas, lp, ts, rng)
    else:
        prices = tuple(_decimal(v, line, f"prices[{i}]") for i, v in enumerate(legs("prices")))
        if any(p <= 0 for p in prices):
            raise ParseError("prices must be positive", line)
        payload = prices
    return EventRecord(ts, kind, payload, line)


def load_event_log(path, n_assets: Optional[int] = None) -> list:
    """Parse a JSON Lines event log; timestamps must not decrease."""
    records = []
    last = None
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            text = text.strip()
            if not text or text.startswith("#"):
                continue
            rec = parse_record(text, lineno, n_assets)
            if last is not None and rec.timestamp < last:
                raise NonMonotoneTimestamps(
                    f"timestamp {rec.timestamp} after {last}", lineno
                )
            last = rec.timestamp
            records.append(rec)
    return records


def _fmt_decimal(x: float) -> str:
    return repr(float(x))


def record_to_json(rec: EventRecord) -> str:
    p = rec.payload
    if rec.kind == TRADE:
        obj = {"kind": TRADE, "timestamp": rec.timestamp,
               "deltas": [None if d is None else _fmt_decimal(d) for d in p.deltas],
               "solve_for": p.solve_for}
    elif rec.kind == QUOTE:
        obj = {"kind": QUOTE, "timestamp": rec.timestamp, "lp": p.lp_id,
               "deltas": [_fmt_decimal(d) for d in p.deltas]}
        if p.price_range is not None:
            obj["range"] = [_fmt_decimal(x) for x in p.price_range]
    else:
        obj = {"kind": PRICE_UPDATE, "timestamp": rec.timestamp,
               "prices": [_fmt_decimal(x) for x in p]}
    return json.dumps(obj)


def write_event_log(records: Iterable, path) -> None:
    lines = []
    for rec in records:
        if isinstance(rec, TradeEvent):
            rec = EventRecord(rec.timestamp, TRADE, rec)
        elif isinstance(rec, QuoteEvent):
            rec = EventRecord(rec.timestamp, QUOTE, rec)
        lines.append(record_to_json(rec) + "\n")
    _atomic_write(path, "".join(lines))


def price_record(timestamp: int, prices: Sequence[float]) -> EventRecord:
    return EventRecord(timestamp, PRICE_UPDATE, tuple(float(p) for p in prices))


def merge_streams(events: Sequence[EventRecord], prices: Sequence[EventRecord]) -> list:
    """Stable merge by timestamp; price updates go before same-time user events."""
    tagged = [(r.timestamp, 0 if r.kind == PRICE_UPDATE else 1, n, r)
              for n, r in enumerate(list(prices) + list(events))]
    tagged.sort(key=lambda t: t[:3])
    return [t[3] for t in tagged]


# -- configuration -----------------------------------------------------------

@dataclass(frozen=True)
class LpSpec:
    lp_id: str
    amounts: Optional[tuple] = None
    liquidity: Optional[float] = None
    lower: Optional[float] = None
    upper: Optional[float] = None


@dataclass(frozen=True)
class SimulationConfig:
    kind: str = CONSTANT_PRODUCT
    weights: Optional[tuple] = None
    gamma: float = 0.0
    phi: float = 0.0
    n_assets: int = 2
    ticks: Optional[tuple] = None
    initial_price: Optional[float] = None
    lps: tuple = ()
    events: Optional[Path] = None
    prices: Optional[Path] = None
    initial_prices: Optional[tuple] = None
    start_time: Optional[int] = None
    sampling_period: int = 60
    equilibrate_each_price_update: bool = False
    equilibration_mode: str = arbitrage.FEE_FREE
    numeraires: Optional[tuple] = None
    on_error: str = "reject"
    output: Optional[Path] = None
    report: Optional[Path] = None

    @property
    def concentrated(self) -> bool:
        return self.ticks is not None

    def spec(self) -> CfmmSpec:
        if self.kind == CONSTANT_PRODUCT:
            return CfmmSpec.constant_product()
        if self.kind == CONSTANT_MEAN:
            return CfmmSpec.constant_mean(self.weights)
        raise ConfigError(f"unsupported pool kind {self.kind!r}")

    def resolved_numeraires(self) -> tuple:
        if self.numeraires is not None:
            return self.numeraires
        base = (Numeraire.fiat(),) if self.initial_prices is not None else ()
        return base + tuple(Numeraire.asset(j) for j in range(1, self.n_assets + 1))


_KEYS = {
    "pool": {"kind", "weights", "gamma", "phi"},
    "grid": {"ticks", "min_price", "max_price", "ratio", "initial_price"},
    "simulation": {
        "events", "prices", "initial_prices", "start_time", "sampling_period",
        "equilibrate_each_price_update", "equilibration_mode", "numeraires",
        "on_error", "output", "report",
    },
    "lp": {"amounts", "liquidity", "lower", "upper"},
}


def _floats(text: str, what: str) -> tuple:
    try:
        return tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{what}: expected numbers, got {text!r}") from None


def _float(text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{what}: expected a number, got {text!r}") from None


def _int(text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{what}: expected an integer, got {text!r}") from None


def _bool(text: str, what: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{what}: expected a boolean, got {text!r}")


def load_config(path, overrides: Optional[dict] = None) -> SimulationConfig:
    """Read an INI config; ``overrides`` (already typed) win over file values."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    base = path.parent
    values: dict = {}
    lps = []
    for section in parser.sections():
        if section.startswith("lp."):
            kind = "lp"
        elif section in _KEYS and section != "lp":
            kind = section
        else:
            raise ConfigError(f"unknown section [{section}]")
        sec = parser[section]
        unknown = set(sec) - _KEYS[kind]
        if unknown:
            raise ConfigError(f"[{section}]: unknown keys {sorted(unknown)}")
        if kind == "lp":
            lps.append(LpSpec(
                lp_id=section[3:],
                amounts=_floats(sec["amounts"], "amounts") if "amounts" in sec else None,
                liquidity=_float(sec["liquidity"], "liquidity") if "liquidity" in sec else None,
                lower=_float(sec["lower"], "lower") if "lower" in sec else None,
                upper=_float(sec["upper"], "upper") if "upper" in sec else None,
            ))
        else:
            values.update({f"{section}.{k}": v for k, v in sec.items()})

    def get(key, conv, default=None):
        return conv(values[key], key) if key in values else default

    kind = values.get("pool.kind", CONSTANT_PRODUCT).strip()
    weights = get("pool.weights", _floats)
    ticks = get("grid.ticks", _floats)
    if ticks is None and "grid.min_price" in values:
        ticks = TickGrid.geometric(
            get("grid.min_price", _float), get("grid.max_price", _float),
            get("grid.ratio", _float),
        ).ticks[0]
    n_assets = len(weights) if weights else 2
    numeraires = None
    if "simulation.numeraires" in values:
        numeraires = tuple(Numeraire.parse(t) for t in
                           values["simulation.numeraires"].replace(",", " ").split())

    def rel(key):
        v = values.get(key)
        return None if v is None else (base / v.strip())

    cfg = SimulationConfig(
        kind=kind,
        weights=weights,
        gamma=get("pool.gamma", _float, 0.0),
        phi=get("pool.phi", _float, 0.0),
        n_assets=n_assets,
        ticks=ticks,
        initial_price=get("grid.initial_price", _float),
        lps=tuple(lps),
        events=rel("simulation.events"),
        prices=rel("simulation.prices"),
        initial_prices=get("simulation.initial_prices", _floats),
        start_time=get("simulation.start_time", _int),
        sampling_period=get("simulation.sampling_period", _int, 60),
        equilibrate_each_price_update=get(
            "simulation.equilibrate_each_price_update", _bool, False),
        equilibration_mode=values.get(
            "simulation.equilibration_mode", arbitrage.FEE_FREE).strip(),
        numeraires=numeraires,
        on_error=values.get("simulation.on_error", "reject").strip(),
        output=rel("simulation.output"),
        report=rel("simulation.report"),
    )
    if overrides:
        cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    validate_config(cfg)
    return cfg


def validate_config(cfg: SimulationConfig) -> None:
    if cfg.sampling_period <= 0:
        raise ConfigError("sampling_period must be positive")
    if cfg.on_error not in ("reject", "abort"):
        raise ConfigError("on_error must be 'reject' or 'abort'")
    if cfg.equilibration_mode not in (arbitrage.FEE_FREE, arbitrage.FEE_AWARE):
        raise ConfigError(f"unknown equilibration_mode {cfg.equilibration_mode!r}")
    for p in (cfg.events, cfg.prices):
        if p is not None and not Path(p).is_file():
            raise ConfigError(f"file not found: {p}")
    if cfg.initial_prices is not None and len(cfg.initial_prices) != cfg.n_assets:
        raise ConfigError("initial_prices needs one price per asset")
    for nm in cfg.resolved_numeraires():
        if nm.kind == "fiat" and cfg.initial_prices is None:
            raise ConfigError("a fiat numeraire needs initial_prices")
        if nm.kind == "asset" and nm.j > cfg.n_assets:
            raise ConfigError(f"numeraire asset{nm.j} outside the pool")
    if cfg.concentrated and cfg.initial_price is None:
        raise ConfigError("a concentrated pool needs grid.initial_price")
    try:
        FeeParams(cfg.gamma, cfg.phi)
        cfg.spec()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# -- simulation ----------------------------------------------------------------

def build_pool(cfg: SimulationConfig):
    fees = FeeParams(cfg.gamma, cfg.phi)
    spec = cfg.spec()
    if cfg.concentrated:
        pool = ConcentratedPoolState.create(
            TickGrid.from_ticks(cfg.ticks), cfg.initial_price, fees, spec)
        for lp in cfg.lps:
            if lp.lower is None or lp.upper is None:
                raise ConfigError(f"LP {lp.lp_id!r} needs lower and upper")
            if lp.liquidity is not None:
                quote = concentrated_pool.quote_for_liquidity(
                    pool, lp.lp_id, lp.lower, lp.upper, lp.liquidity)
            else:
                quote = QuoteEvent(lp.amounts, lp.lp_id, 0, (lp.lower, lp.upper))
            pool = concentrated_pool.apply_quote(pool, quote).state
        return pool
    pool = uniform_pool.UniformPoolState.empty(spec, fees)
    for lp in cfg.lps:
        if lp.amounts is None:
            raise ConfigError(f"LP {lp.lp_id!r} needs amounts")
        if len(lp.amounts) != spec.n_assets:
            raise ConfigError(f"LP {lp.lp_id!r}: amounts do not match the pool size")
        amounts = lp.amounts
        if not pool.is_empty:
            # later LPs join at the current ratio, sized by their first asset
            alpha = amounts[0] / pool.q[0]
            amounts = tuple(alpha * x for x in pool.q)
        pool = uniform_pool.apply_quote(pool, QuoteEvent(amounts, lp.lp_id))
    return pool


def _apply_trade(pool, trade):
    if isinstance(pool, ConcentratedPoolState):
        out = concentrated_pool.execute_trade(pool, trade)
        return out.state, out.fee_free, out.accrual
    out = uniform_pool.apply_trade(pool, trade)
    return out.state, out.fee_free, out.accrual


def _apply_quote(pool, quote):
    if isinstance(pool, ConcentratedPoolState):
        return concentrated_pool.apply_quote(pool, quote).state
    return uniform_pool.apply_quote(pool, quote)


@dataclass
class _Ledger:
    """Running window sums, pool-wide and per LP."""

    q_start: tuple
    held: tuple
    quote_sum: tuple
    trade_sum: tuple
    fees_start: tuple
    lp_start: dict = field(default_factory=dict)
    lp_held: dict = field(default_factory=dict)
    lp_fees_start: dict = field(default_factory=dict)


@dataclass
class SimulationResult:
    series: list
    report: dict
    pool: object


def run_simulation(cfg: SimulationConfig, events: Optional[Sequence[EventRecord]] = None,
                   ) -> SimulationResult:
    """Replay the configured logs and sample metrics every ``sampling_period``.

    Events are applied in timestamp order (price updates first within a
    timestamp, log order otherwise). Rejected events are recorded with
    their reason when ``on_error`` is ``reject``; with ``abort`` the first
    error is raised as :class:`SimulationError`.
    """
    n = cfg.n_assets
    if events is None:
        user = load_event_log(cfg.events, n) if cfg.events else []
        feed = load_event_log(cfg.prices, n) if cfg.prices else []
        for rec in feed:
            if rec.kind != PRICE_UPDATE:
                raise ParseError("price feed may only hold price_update records", rec.line)
        events = merge_streams(user, feed)
    else:
        events = merge_streams(events, [])

    pool = build_pool(cfg)
    numeraires = cfg.resolved_numeraires()
    prices = tuple(cfg.initial_prices) if cfg.initial_prices is not None else None
    start = cfg.start_time if cfg.start_time is not None else (
        events[0].timestamp if events else 0)

    led = _Ledger(
        q_start=pool.q_nofee, held=pool.q_nofee, quote_sum=zeros(n),
        trade_sum=zeros(n), fees_start=pool.cumulative_lp_fees,
    )
    for lp in _lp_ids(pool):
        q0 = pool.lp_quantities(lp)
        led.lp_start[lp] = q0
        led.lp_held[lp] = q0
        led.lp_fees_start[lp] = pool.lp_fees.get(lp, zeros(n))

    series = []
    rejections = []
    counts = {"applied": 0, "injected": 0}

    def sample(ts):
        ledger = WindowLedger(
            q_start=led.q_start, q_end_nofee=pool.q_nofee, quote_sum=led.quote_sum,
            fee_sum=vsub(pool.cumulative_lp_fees, led.fees_start),
            prices_end=prices, spot_end=pool.price_matrix(),
            trade_sum=led.trade_sum, held=led.held,
        )
        for nm in numeraires:
            series.append(snapshot(ledger, nm, ts))

    def trade(t):
        nonlocal pool
        pool, fee_free, _ = _apply_trade(pool, t)
        led.trade_sum = vadd(led.trade_sum, fee_free)

    def apply(idx, rec):
        nonlocal pool, prices
        try:
            if rec.kind == PRICE_UPDATE:
                if len(rec.payload) != n:
                    raise DimensionMismatch("price vector does not match the pool")
                prices = rec.payload
                if cfg.equilibrate_each_price_update and _lp_ids(pool):
                    counts["injected"] += _equilibrate(pool, prices, cfg, rec.timestamp, trade)
            elif rec.kind == TRADE:
                trade(rec.payload)
            else:
                q = rec.payload
                pool = _apply_quote(pool, q)
                led.quote_sum = vadd(led.quote_sum, q.deltas)
                led.held = vadd(led.held, q.deltas)
                if q.lp_id not in led.lp_held:
                    led.lp_start[q.lp_id] = zeros(n)
                    led.lp_held[q.lp_id] = zeros(n)
                    led.lp_fees_start[q.lp_id] = zeros(n)
                led.lp_held[q.lp_id] = vadd(led.lp_held[q.lp_id], q.deltas)
            counts["applied"] += 1
        except CfmmError as exc:
            if cfg.on_error == "abort":
                raise SimulationError(idx, exc) from exc
            rejections.append({"index": idx, "line": rec.line, "kind": rec.kind,
                               "reason": f"{type(exc).__name__}: {exc}"})
            log.debug("event %d rejected: %s", idx, exc)

    idx = 0
    if events:
        last_ts = events[-1].timestamp
        ts = start
        while ts <= last_ts:
            while idx < len(events) and events[idx].timestamp <= ts:
                apply(idx, events[idx])
                idx += 1
            sample(ts)
            ts += cfg.sampling_period
    while idx < len(events):
        apply(idx, events[idx])
        idx += 1

    report = _final_report(cfg, pool, led, prices, numeraires, len(events),
                           counts["applied"], len(rejections), counts["injected"],
                           rejections)
    return SimulationResult(series, report, pool)


def _lp_ids(pool) -> list:
    if isinstance(pool, ConcentratedPoolState):
        return sorted({p.lp_id for p in pool.positions})
    return sorted(pool.lp_shares)


def _equilibrate(pool, prices, cfg, ts, trade) -> int:
    try:
        t = arbitrage.equilibrate(pool, prices, cfg.equilibration_mode, ts)
    except LiquidityExhausted as exc:
        if exc.trade is None:
            return 0
        t = exc.trade
    if t is None:
        return 0
    trade(t)
    return 1


def _final_report(cfg, pool, led, prices, numeraires, total, applied, rejected,
                  injected, rejections) -> dict:
    n = cfg.n_assets
    final = {}
    ledger = WindowLedger(
        q_start=led.q_start, q_end_nofee=pool.q_nofee, quote_sum=led.quote_sum,
        fee_sum=vsub(pool.cumulative_lp_fees, led.fees_start), prices_end=prices,
        spot_end=pool.price_matrix(), trade_sum=led.trade_sum, held=led.held,
    )
    for nm in numeraires:
        try:
            s = snapshot(ledger, nm)
            final[nm.label] = {"il": s.il, "rv": s.rv, "farv": s.farv}
        except CfmmError as exc:
            final[nm.label] = {"error": str(exc)}
    lps = {}
    for lp in sorted(led.lp_held):
        fees_now = pool.lp_fees.get(lp, zeros(n))
        lp_ledger = WindowLedger(
            q_start=led.lp_start.get(lp, zeros(n)), q_end_nofee=pool.lp_quantities(lp),
            quote_sum=vsub(led.lp_held[lp], led.lp_start.get(lp, zeros(n))),
            fee_sum=vsub(fees_now, led.lp_fees_start.get(lp, zeros(n))),
            prices_end=prices, spot_end=pool.price_matrix(), held=led.lp_held[lp],
        )
        entry = {"fees": list(lp_ledger.fee_sum)}
        for nm in numeraires:
            try:
                entry[f"farv_{nm.label}"] = snapshot(lp_ledger, nm).farv
            except CfmmError:
                entry[f"farv_{nm.label}"] = None
        lps[lp] = entry
    return {
        "events_total": total,
        "events_applied": applied,
        "events_rejected": rejected,
        "injected_trades": injected,
        "rejections": rejections,
        "final_quantities": list(pool.q),
        "final_quantities_nofee": list(pool.q_nofee),
        "total_lp_fees": list(vsub(pool.cumulative_lp_fees, led.fees_start)),
        "treasury_fees": list(pool.treasury),
        "final_metrics": final,
        "lps": lps,
    }


# -- export ------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(x, ".17g")


def series_rows(series: Sequence[MetricSnapshot]) -> list:
    return [
        [str(s.timestamp), s.numeraire.label, _fmt(s.hold_value), _fmt(s.pool_value),
         _fmt(s.pool_value_with_fees), _fmt(s.il), _fmt(s.rv), _fmt(s.farv)]
        for s in series
    ]


def format_series(series: Sequence[MetricSnapshot], delimiter: str = ",") -> str:
    lines = [delimiter.join(SERIES_HEADER)]
    lines += [delimiter.join(row) for row in series_rows(series)]
    return "\n".join(lines) + "\n"


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def export_series(series: Sequence[MetricSnapshot], path, delimiter: str = ",") -> None:
    _atomic_write(path, format_series(series, delimiter))


def write_report(report: dict, path) -> None:
    _atomic_write(path, json.dumps(report, indent=2, sort_keys=True) + "\n")


def read_series(path, delimiter: str = ",") -> list:
    """Parse an exported series back into dictionaries of floats."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(delimiter)
        if tuple(header) != SERIES_HEADER:
            raise ParseError(f"unexpected header {header}", 1)
        rows = []
        for lineno, text in enumerate(fh, start=2):
            cells = text.rstrip("\n").split(delimiter)
            if len(cells) != len(header):
                raise ParseError("wrong number of columns", lineno)
            row = {"timestamp": int(cells[0]), "numeraire": cells[1]}
            row.update({h: float(c) for h, c in zip(header[2:], cells[2:])})
            rows.append(row)
    return rows
