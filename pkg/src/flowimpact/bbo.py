"""Best bid/offer event processing and one-second bar construction.

An order book event is a change of the best quotes (price or size on either
side).  Each event contributes a signed imbalance amount depending on how the
best bid and ask moved; summing those contributions within one-second bins
gives the order flow imbalance series that the structural estimation consumes
together with log mid-quote returns.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .errors import CrossedBookError, InputFormatError

__all__ = [
    "BboEvent",
    "SecondBar",
    "SessionSeries",
    "compute_event",
    "displaced_size",
    "aggregate_seconds",
    "summary_stats",
    "intraday_profile",
    "read_bbo_csv",
    "write_bars_csv",
    "read_bars_csv",
    "parse_clock",
    "SESSION_OPEN",
    "SESSION_CLOSE",
]

SESSION_OPEN = "08:30:00"
SESSION_CLOSE = "15:00:00"

BAR_HEADER = ["date", "t", "r_bps", "f_thousands", "ne", "ase_hundreds", "spr", "depth_thousands"]
BBO_HEADER = ["date", "timestamp", "sequence", "bid_price", "bid_size", "ask_price", "ask_size"]


def parse_clock(text: str) -> float:
    """Convert ``HH:MM:SS`` or ``HH:MM:SS.ffffff`` to seconds since midnight."""
    parts = text.strip().split(":")
    if len(parts) != 3:
        raise InputFormatError(f"bad clock time {text!r}")
    try:
        hours, minutes, seconds = int(parts[0]), int(parts[1]), float(parts[2])
    except ValueError as exc:
        raise InputFormatError(f"bad clock time {text!r}") from exc
    return hours * 3600.0 + minutes * 60.0 + seconds


@dataclasses.dataclass(frozen=True)
class BboEvent:
    """One best-quote update.

    Attributes
    ----------
    timestamp : float
        Seconds since the session open.
    sequence : int
        Strictly increasing update counter within a day.
    bid_price, ask_price : float
        Best quotes; the book must be uncrossed (ask above bid).
    bid_size, ask_size : float
        Depth at the best quotes, in contracts; strictly positive.
    """

    timestamp: float
    sequence: int
    bid_price: float
    bid_size: float
    ask_price: float
    ask_size: float

    def __post_init__(self):
        if self.ask_price <= self.bid_price:
            raise CrossedBookError(
                f"crossed book at sequence {self.sequence}: "
                f"ask {self.ask_price} <= bid {self.bid_price}"
            )
        if self.bid_size <= 0 or self.ask_size <= 0:
            raise InputFormatError(f"non-positive size at sequence {self.sequence}")

    @property
    def mid(self) -> float:
        return 0.5 * (self.bid_price + self.ask_price)

    @property
    def spread(self) -> float:
        return self.ask_price - self.bid_price


def compute_event(prev: BboEvent, curr: BboEvent) -> float:
    """Signed imbalance contribution of one best-quote update.

    Size posted at an improving or holding bid adds buy pressure, size removed
    from a weakening bid subtracts it, and the ask side mirrors that with
    opposite sign:

        e = q_b * 1{Pb >= Pb_prev} - q_b_prev * 1{Pb <= Pb_prev}
            - q_a * 1{Pa <= Pa_prev} + q_a_prev * 1{Pa >= Pa_prev}

    The four indicator terms make the measure antisymmetric: swapping the two
    events flips the sign.
    """
    e = 0.0
    if curr.bid_price >= prev.bid_price:
        e += curr.bid_size
    if curr.bid_price <= prev.bid_price:
        e -= prev.bid_size
    if curr.ask_price <= prev.ask_price:
        e -= curr.ask_size
    if curr.ask_price >= prev.ask_price:
        e += prev.ask_size
    return e


def displaced_size(prev: BboEvent, curr: BboEvent) -> float:
    """Total size displaced by one update, used for the average-event-size bar.

    Per side: the absolute size change when the best price held, or the newly
    posted best size when the price moved.  Documented convention; event size
    has no canonical book-level definition.
    """
    if curr.bid_price == prev.bid_price:
        bid_part = abs(curr.bid_size - prev.bid_size)
    else:
        bid_part = curr.bid_size
    if curr.ask_price == prev.ask_price:
        ask_part = abs(curr.ask_size - prev.ask_size)
    else:
        ask_part = curr.ask_size
    return bid_part + ask_part


def _depth_contrib(prev: BboEvent, curr: BboEvent):
    """(bid_num, bid_den, ask_num, ask_den) increments for the depth measure.

    Depth averages the size consumed or posted at price changes: the new best
    size after a retreat, the previous best size after an improvement.
    """
    bn = bd = an = ad = 0.0
    if curr.bid_price < prev.bid_price:
        bn, bd = curr.bid_size, 1.0
    elif curr.bid_price > prev.bid_price:
        bn, bd = prev.bid_size, 1.0
    if curr.ask_price > prev.ask_price:
        an, ad = curr.ask_size, 1.0
    elif curr.ask_price < prev.ask_price:
        an, ad = prev.ask_size, 1.0
    return bn, bd, an, ad


@dataclasses.dataclass
class SecondBar:
    """One second of aggregated book activity.

    Units follow the reporting conventions used throughout: returns in basis
    points, flow and depth in thousands of contracts, event sizes in hundreds
    of contracts, spread in index points.  ``ase_hundreds`` is defined only
    when the second contains events; ``depth_thousands`` only when a best
    price changed; ``spr`` only once the book has been quoted.  Undefined
    values are NaN in memory and empty fields on disk.
    """

    t: int
    ret_bps: float
    flow_thousands: float
    n_events: int
    ase_hundreds: float
    spread: float
    depth_thousands: float


@dataclasses.dataclass
class SessionSeries:
    """Gapless per-second series for one trading day.

    ``bars`` covers every second of the session in order; empty seconds carry
    zero return and zero flow (gap policy "zero-fill").
    """

    date: str
    bars: list[SecondBar]
    n_seconds: int
    gap_policy: str = "zero-fill"

    def array(self, field: str) -> np.ndarray:
        return np.array([getattr(b, field) for b in self.bars], dtype=float)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "date": self.date,
                "t": [b.t for b in self.bars],
                "r_bps": self.array("ret_bps"),
                "f_thousands": self.array("flow_thousands"),
                "ne": [b.n_events for b in self.bars],
                "ase_hundreds": self.array("ase_hundreds"),
                "spr": self.array("spread"),
                "depth_thousands": self.array("depth_thousands"),
            }
        )


def aggregate_seconds(
    events: Sequence[BboEvent],
    n_seconds: int,
    date: str = "",
) -> SessionSeries:
    """Aggregate a day's event stream into gapless one-second bars.

    The first event of the day initializes the book: it counts toward the
    event total and the spread average of its second but contributes no flow,
    displaced size, or depth (there is no prior state to compare against).
    Returns use the last mid quote of each second, carried forward over empty
    seconds, so the cumulative return telescopes to the log ratio of the last
    and first observed mids.  Flow is conserved: summing ``f_thousands`` times
    one thousand over the session returns the sum of event contributions.

    Raises
    ------
    InputFormatError
        If events are unordered or outside ``[0, n_seconds)``.
    """
    if not events:
        raise InputFormatError(f"{date or 'session'}: no events to aggregate")
    flow = np.zeros(n_seconds)
    n_events = np.zeros(n_seconds, dtype=int)
    displaced = np.zeros(n_seconds)
    spread_sum = np.zeros(n_seconds)
    bid_num = np.zeros(n_seconds)
    bid_den = np.zeros(n_seconds)
    ask_num = np.zeros(n_seconds)
    ask_den = np.zeros(n_seconds)
    last_mid = np.full(n_seconds, np.nan)
    last_spread = np.full(n_seconds, np.nan)

    prev: BboEvent | None = None
    for ev in events:
        if not (0.0 <= ev.timestamp < n_seconds):
            raise InputFormatError(
                f"event at sequence {ev.sequence} outside session bounds"
            )
        if prev is not None and ev.sequence <= prev.sequence:
            raise InputFormatError(
                f"non-increasing sequence {ev.sequence} after {prev.sequence}"
            )
        sec = int(ev.timestamp)
        n_events[sec] += 1
        spread_sum[sec] += ev.spread
        last_mid[sec] = ev.mid
        last_spread[sec] = ev.spread
        if prev is not None:
            flow[sec] += compute_event(prev, ev)
            displaced[sec] += displaced_size(prev, ev)
            bn, bd, an, ad = _depth_contrib(prev, ev)
            bid_num[sec] += bn
            bid_den[sec] += bd
            ask_num[sec] += an
            ask_den[sec] += ad
        prev = ev

    bars: list[SecondBar] = []
    carried_mid = math.nan
    carried_spread = math.nan
    prev_mid = math.nan
    for t in range(n_seconds):
        if not math.isnan(last_mid[t]):
            carried_mid = last_mid[t]
            carried_spread = last_spread[t]
        ne = int(n_events[t])
        if ne > 0:
            spr = spread_sum[t] / ne
        else:
            spr = carried_spread
        if math.isnan(prev_mid) or math.isnan(carried_mid):
            ret = 0.0
        else:
            ret = (math.log(carried_mid) - math.log(prev_mid)) * 1e4
        prev_mid = carried_mid

        terms = []
        if bid_den[t] > 0:
            terms.append(bid_num[t] / bid_den[t])
        if ask_den[t] > 0:
            terms.append(ask_num[t] / ask_den[t])
        depth = sum(terms) / len(terms) if terms else math.nan

        # displaced size of the day's first event is 0 by convention, so ase
        # stays defined whenever the second has any event at all
        ase = displaced[t] / ne if ne > 0 else math.nan

        bars.append(
            SecondBar(
                t=t,
                ret_bps=ret,
                flow_thousands=flow[t] / 1e3,
                n_events=ne,
                ase_hundreds=ase / 1e2 if ne > 0 else math.nan,
                spread=spr,
                depth_thousands=depth / 1e3 if not math.isnan(depth) else math.nan,
            )
        )
    return SessionSeries(date=date, bars=bars, n_seconds=n_seconds)


_SUMMARY_VARS = [
    ("return_bps", "ret_bps", 1.0),
    ("flow_thousands", "flow_thousands", 1.0),
    ("events_hundreds", "n_events", 1e-2),
    ("event_size_hundreds", "ase_hundreds", 1.0),
    ("spread_points", "spread", 1.0),
    ("depth_thousands", "depth_thousands", 1.0),
]

SUMMARY_COLUMNS = ["mean", "sd", "p1", "p5", "p25", "p50", "p75", "p95", "p99"]
_PCTS = [1, 5, 25, 50, 75, 95, 99]


def summary_stats(sessions: Iterable[SessionSeries]) -> pd.DataFrame:
    """Pooled descriptive statistics of the bar variables.

    One row per variable with mean, sample standard deviation, and the
    1/5/25/50/75/95/99 percentiles; undefined seconds are dropped per
    variable.  Event counts are reported in hundreds.
    """
    pooled: dict[str, list[np.ndarray]] = {name: [] for name, _, _ in _SUMMARY_VARS}
    for s in sessions:
        for name, field, scale in _SUMMARY_VARS:
            pooled[name].append(s.array(field) * scale)
    rows = {}
    for name, _, _ in _SUMMARY_VARS:
        x = np.concatenate(pooled[name]) if pooled[name] else np.array([])
        x = x[~np.isnan(x)]
        if x.size == 0:
            rows[name] = [math.nan] * len(SUMMARY_COLUMNS)
            continue
        sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
        rows[name] = [float(np.mean(x)), sd] + [
            float(np.percentile(x, q)) for q in _PCTS
        ]
    return pd.DataFrame.from_dict(rows, orient="index", columns=SUMMARY_COLUMNS)


def intraday_profile(
    sessions: Iterable[SessionSeries], interval_seconds: int = 300
) -> pd.DataFrame:
    """Time-of-day activity profile averaged across days.

    Per interval: standard deviation of returns and of flow, mean event count
    (hundreds), mean event size, mean spread, and mean depth.  Feeds the
    intraday activity figure and its plot-ready CSV.
    """
    frames = [s.to_frame().assign(interval=lambda d: d["t"] // interval_seconds) for s in sessions]
    df = pd.concat(frames, ignore_index=True)
    grouped = df.groupby("interval")
    out = pd.DataFrame(
        {
            "sd_r_bps": grouped["r_bps"].std(ddof=1),
            "sd_f_thousands": grouped["f_thousands"].std(ddof=1),
            "mean_ne_hundreds": grouped["ne"].mean() / 1e2,
            "mean_ase_hundreds": grouped["ase_hundreds"].mean(),
            "mean_spr": grouped["spr"].mean(),
            "mean_depth_thousands": grouped["depth_thousands"].mean(),
        }
    )
    out.index.name = "interval"
    return out.reset_index()


def read_bbo_csv(
    path: str,
    session_open: str = SESSION_OPEN,
    session_close: str = SESSION_CLOSE,
) -> tuple[dict[str, list[BboEvent]], int]:
    """Parse a quote-update CSV into per-date event lists.

    Expected header: ``date,timestamp,sequence,bid_price,bid_size,ask_price,
    ask_size`` with clock-format timestamps.  Rows outside the session bounds
    are skipped and counted (second return value).  Format violations raise
    with the offending line number; a crossed book names its sequence number.
    """
    open_s = parse_clock(session_open)
    close_s = parse_clock(session_close)
    per_date: dict[str, list[BboEvent]] = {}
    skipped = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputFormatError(f"{path}: empty file") from None
        if [h.strip() for h in header] != BBO_HEADER:
            raise InputFormatError(f"{path}: bad header {header!r}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(BBO_HEADER):
                raise InputFormatError(f"expected {len(BBO_HEADER)} fields, got {len(row)}", line=lineno)
            date = row[0].strip()
            ts = parse_clock(row[1]) - open_s
            try:
                seq = int(row[2])
                bp, bq = float(row[3]), float(row[4])
                ap, aq = float(row[5]), float(row[6])
            except ValueError as exc:
                raise InputFormatError(f"non-numeric field in {row!r}", line=lineno) from exc
            if not (0.0 <= ts < close_s - open_s):
                skipped += 1
                continue
            try:
                ev = BboEvent(ts, seq, bp, bq, ap, aq)
            except CrossedBookError:
                raise
            except InputFormatError as exc:
                raise InputFormatError(str(exc), line=lineno) from exc
            bucket = per_date.setdefault(date, [])
            if bucket and seq <= bucket[-1].sequence:
                raise InputFormatError(
                    f"sequence {seq} not increasing within date {date}", line=lineno
                )
            bucket.append(ev)
    if not per_date:
        raise InputFormatError(f"{path}: no usable rows")
    return per_date, skipped


def _fmt(x: float) -> str:
    return "" if (isinstance(x, float) and math.isnan(x)) else str(x)


def write_bars_csv(sessions: Iterable[SessionSeries], path: str, run_tag: str | None = None) -> None:
    """Write bar files with the documented schema, one row per second.

    Undefined fields are left empty.  ``run_tag`` adds a leading comment line
    tying the file to its run manifest.
    """
    with open(path, "w", newline="") as fh:
        if run_tag:
            fh.write(f"# run {run_tag}\n")
        writer = csv.writer(fh)
        writer.writerow(BAR_HEADER)
        for s in sessions:
            for b in s.bars:
                writer.writerow(
                    [
                        s.date,
                        b.t,
                        _fmt(b.ret_bps),
                        _fmt(b.flow_thousands),
                        b.n_events,
                        _fmt(b.ase_hundreds),
                        _fmt(b.spread),
                        _fmt(b.depth_thousands),
                    ]
                )


def read_bars_csv(path: str) -> list[SessionSeries]:
    """Read a bar CSV back into per-day series (inverse of write_bars_csv)."""

    def parse(field: str) -> float:
        return float(field) if field != "" else math.nan

    per_date: dict[str, list[SecondBar]] = {}
    order: list[str] = []
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first:
            raise InputFormatError(f"{path}: empty file")
        if first.startswith("#"):
            first = fh.readline()
        header = [h.strip() for h in first.rstrip("\n").split(",")]
        if header != BAR_HEADER:
            raise InputFormatError(f"{path}: bad header {header!r}", line=1)
        for lineno, row in enumerate(csv.reader(fh), start=2):
            if not row:
                continue
            if len(row) != len(BAR_HEADER):
                raise InputFormatError(f"expected {len(BAR_HEADER)} fields", line=lineno)
            date = row[0]
            try:
                bar = SecondBar(
                    t=int(row[1]),
                    ret_bps=parse(row[2]),
                    flow_thousands=parse(row[3]),
                    n_events=int(row[4]),
                    ase_hundreds=parse(row[5]),
                    spread=parse(row[6]),
                    depth_thousands=parse(row[7]),
                )
            except ValueError as exc:
                raise InputFormatError(f"bad row {row!r}", line=lineno) from exc
            if date not in per_date:
                per_date[date] = []
                order.append(date)
            per_date[date].append(bar)
    sessions = []
    for date in order:
        bars = per_date[date]
        expected = list(range(len(bars)))
        if [b.t for b in bars] != expected:
            raise InputFormatError(f"{path}: seconds for {date} not gapless from 0")
        sessions.append(SessionSeries(date=date, bars=bars, n_seconds=len(bars)))
    return sessions
