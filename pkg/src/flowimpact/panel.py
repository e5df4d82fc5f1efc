"""Interval-by-interval estimation protocol and panel inference.

Every session splits into fixed windows (fifteen minutes by default), each
window into three nested five-minute volatility states.  A window passes
through autoregression fitting, the rank gate, and structural estimation;
failures at any stage are recorded with their reason and never abort the
run.  Pooled parameter summaries, cluster-robust regressions of the
estimates on announcement dummies and activity covariates, and plot-ready
aggregates all operate on the resulting row set.
"""

from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import logging
import math

import numpy as np
import pandas as pd
import scipy.linalg
import scipy.stats

from .bbo import SessionSeries, parse_clock
from .dynamics import ImpulseResponseSet, impulse_responses
from .errors import (
    BoundaryError,
    CollinearityError,
    ConfigError,
    ConvergenceError,
    DegenerateWindowError,
    IdentificationError,
    InputFormatError,
    InsufficientSampleError,
    OrderConditionError,
)
from .ith import GmmConfig, RegimePartition, check_rank, estimate_gmm
from .varcore import fit_var, residual_moments

__all__ = [
    "WindowSpec",
    "PanelRow",
    "ExclusionRecord",
    "ProtocolResult",
    "AnnouncementCalendar",
    "read_calendar_csv",
    "run_protocol",
    "pool_summaries",
    "clustered_ols",
    "RegressionResult",
    "announcement_regressions",
    "format_regression_table",
    "panel_frame",
    "subinterval_frame",
]

logger = logging.getLogger(__name__)

EXCLUSION_REASONS = (
    "degenerate",
    "insufficient_sample",
    "rank",
    "order",
    "identification",
    "convergence",
    "boundary",
)


@dataclasses.dataclass(frozen=True)
class WindowSpec:
    """Session partitioning: window length and nested state scheme."""

    window_minutes: int = 15
    n_regimes: int = 3
    session_open: str = "08:30:00"
    session_close: str = "15:00:00"

    def __post_init__(self):
        if self.window_minutes <= 0 or self.n_regimes < 2:
            raise ConfigError("window must be positive and carry at least two states")
        if self.window_seconds % self.n_regimes != 0:
            raise ConfigError("window does not split into equal states")

    @property
    def window_seconds(self) -> int:
        return self.window_minutes * 60

    @property
    def sub_seconds(self) -> int:
        return self.window_seconds // self.n_regimes

    @property
    def session_seconds(self) -> int:
        span = parse_clock(self.session_close) - parse_clock(self.session_open)
        return int(round(span))

    def windows_per_day(self, n_seconds: int | None = None) -> int:
        n = self.session_seconds if n_seconds is None else n_seconds
        if n % self.window_seconds != 0:
            raise ConfigError(
                f"session of {n}s does not split into {self.window_minutes}-minute windows"
            )
        return n // self.window_seconds

    def subs_per_day(self, n_seconds: int | None = None) -> int:
        return self.windows_per_day(n_seconds) * self.n_regimes


@dataclasses.dataclass
class PanelRow:
    """One successfully estimated window."""

    date: str
    window_index: int
    window_id: str
    start_second: int
    lag_order: int
    nobs: int
    price_impact: float
    price_impact_se: float
    flow_impact: float
    flow_impact_se: float
    ret_vols: tuple[float, ...]
    ret_vol_ses: tuple[float, ...]
    flow_vols: tuple[float, ...]
    flow_vol_ses: tuple[float, ...]
    j_stat: float
    j_pvalue: float
    stationary: bool
    spectral_radius: float
    long_run: tuple[float, float, float, float] | None
    inv_depth: float
    ne_millions: float
    ase_thousands: float
    spr: float
    sub_inv_depth: tuple[float, ...]
    sub_ne_millions: tuple[float, ...]
    sub_ase_thousands: tuple[float, ...]
    sub_spr: tuple[float, ...]
    irfs: ImpulseResponseSet | None = dataclasses.field(default=None, repr=False)

    @property
    def price_impact_t(self) -> float:
        return self.price_impact / self.price_impact_se

    @property
    def flow_impact_t(self) -> float:
        return self.flow_impact / self.flow_impact_se


@dataclasses.dataclass(frozen=True)
class ExclusionRecord:
    date: str
    window_index: int
    window_id: str
    reason: str
    detail: str


@dataclasses.dataclass
class ProtocolResult:
    rows: list[PanelRow]
    exclusions: list[ExclusionRecord]
    attempted: int

    def accounting_holds(self) -> bool:
        return self.attempted == len(self.rows) + len(self.exclusions)


def _interval_covariates(bars_slice) -> tuple[float, float, float, float]:
    """(1/mean depth, total events in millions, event-weighted size in
    thousands, event-weighted spread) over one interval."""
    depth = np.array([b.depth_thousands for b in bars_slice])
    depth = depth[~np.isnan(depth)]
    inv_depth = 1.0 / float(np.mean(depth)) if depth.size else math.nan
    ne = np.array([b.n_events for b in bars_slice], dtype=float)
    total = ne.sum()
    ne_millions = total / 1e6
    if total > 0:
        ase = np.array([b.ase_hundreds for b in bars_slice])
        weights = np.where(np.isnan(ase), 0.0, ne)
        ase_thousands = (
            float(np.nansum(ase * ne) / weights.sum()) / 10.0 if weights.sum() > 0 else math.nan
        )
        spr = np.array([b.spread for b in bars_slice])
        w2 = np.where(np.isnan(spr), 0.0, ne)
        spr_mean = float(np.nansum(spr * ne) / w2.sum()) if w2.sum() > 0 else math.nan
    else:
        ase_thousands = math.nan
        spr_mean = math.nan
    return inv_depth, ne_millions, ase_thousands, spr_mean


_REASON_BY_TYPE = (
    (DegenerateWindowError, "degenerate"),
    (InsufficientSampleError, "insufficient_sample"),
    (OrderConditionError, "order"),
    (IdentificationError, "identification"),
    (ConvergenceError, "convergence"),
    (BoundaryError, "boundary"),
)


def _classify(exc: Exception) -> str:
    for typ, reason in _REASON_BY_TYPE:
        if isinstance(exc, typ):
            return reason
    raise exc


def _process_window(
    session: SessionSeries,
    spec: WindowSpec,
    index: int,
    max_lag: int,
    gmm_config: GmmConfig,
    k_max: int,
) -> PanelRow | ExclusionRecord:
    start = index * spec.window_seconds
    stop = start + spec.window_seconds
    window_id = f"{session.date}/w{index:02d}"
    bars = session.bars[start:stop]
    y = np.column_stack(
        ([b.ret_bps for b in bars], [b.flow_thousands for b in bars])
    )

    def excluded(reason: str, detail: str) -> ExclusionRecord:
        return ExclusionRecord(session.date, index, window_id, reason, detail)

    try:
        fit = fit_var(y, max_lag=max_lag, window_id=window_id)
        partition = RegimePartition.nested(spec.window_seconds, spec.n_regimes)
        moments = residual_moments(fit, partition)
    except Exception as exc:  # noqa: BLE001 - classified below
        return excluded(_classify(exc), str(exc))

    rank = check_rank(moments, rel_tol=gmm_config.rank_tol)
    if not rank.passed:
        return excluded(
            "rank",
            f"normalized determinant {rank.min_normalized_det:.3e} at pair {rank.worst_pair}",
        )

    try:
        estimate = estimate_gmm(moments, gmm_config)
    except Exception as exc:  # noqa: BLE001 - classified below
        return excluded(_classify(exc), str(exc))

    irfs = impulse_responses(fit, estimate, k_max=k_max)

    inv_depth, ne_m, ase_k, spr = _interval_covariates(bars)
    sub_cov = [
        _interval_covariates(bars[s * spec.sub_seconds : (s + 1) * spec.sub_seconds])
        for s in range(spec.n_regimes)
    ]

    long_run = None
    if irfs.long_run is not None:
        lr = irfs.long_run
        long_run = (float(lr[0, 0]), float(lr[0, 1]), float(lr[1, 0]), float(lr[1, 1]))

    return PanelRow(
        date=session.date,
        window_index=index,
        window_id=window_id,
        start_second=start,
        lag_order=fit.lag_order,
        nobs=estimate.nobs,
        price_impact=estimate.price_impact,
        price_impact_se=estimate.price_impact_se,
        flow_impact=estimate.flow_impact,
        flow_impact_se=estimate.flow_impact_se,
        ret_vols=tuple(estimate.ret_vols),
        ret_vol_ses=tuple(estimate.ret_vol_ses),
        flow_vols=tuple(estimate.flow_vols),
        flow_vol_ses=tuple(estimate.flow_vol_ses),
        j_stat=estimate.j_stat,
        j_pvalue=estimate.j_pvalue,
        stationary=irfs.stationary,
        spectral_radius=irfs.spectral_radius,
        long_run=long_run,
        inv_depth=inv_depth,
        ne_millions=ne_m,
        ase_thousands=ase_k,
        spr=spr,
        sub_inv_depth=tuple(c[0] for c in sub_cov),
        sub_ne_millions=tuple(c[1] for c in sub_cov),
        sub_ase_thousands=tuple(c[2] for c in sub_cov),
        sub_spr=tuple(c[3] for c in sub_cov),
        irfs=irfs,
    )


def _process_day(args) -> list:
    session, spec, max_lag, gmm_config, k_max = args
    n_windows = spec.windows_per_day(session.n_seconds)
    return [
        _process_window(session, spec, i, max_lag, gmm_config, k_max)
        for i in range(n_windows)
    ]


def run_protocol(
    sessions: list[SessionSeries],
    spec: WindowSpec | None = None,
    max_lag: int = 10,
    gmm_config: GmmConfig | None = None,
    k_max: int = 10,
    jobs: int = 1,
) -> ProtocolResult:
    """Estimate every window of every session.

    Window failures become :class:`ExclusionRecord` entries with one of the
    documented reasons; the accounting identity ``attempted == estimated +
    excluded`` always holds.  ``jobs`` > 1 processes days in parallel with
    identical output order and content.
    """
    spec = spec or WindowSpec()
    gmm_config = gmm_config or GmmConfig()
    for s in sessions:
        spec.windows_per_day(s.n_seconds)  # validates divisibility up front

    tasks = [(s, spec, max_lag, gmm_config, k_max) for s in sessions]
    if jobs > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            per_day = list(pool.map(_process_day, tasks))
    else:
        per_day = [_process_day(t) for t in tasks]

    rows: list[PanelRow] = []
    exclusions: list[ExclusionRecord] = []
    attempted = 0
    for day_results in per_day:
        for item in day_results:
            attempted += 1
            if isinstance(item, PanelRow):
                rows.append(item)
            else:
                exclusions.append(item)
    logger.info(
        "protocol: %d attempted, %d estimated, %d excluded",
        attempted, len(rows), len(exclusions),
    )
    return ProtocolResult(rows=rows, exclusions=exclusions, attempted=attempted)


_PCTS = [1, 5, 25, 50, 75, 95, 99]
SUMMARY_COLUMNS = ["mean", "sd", "p1", "p5", "p25", "p50", "p75", "p95", "p99"]


def _summary_row(values: np.ndarray) -> list[float]:
    values = values[np.isfinite(values)]
    if values.size == 0:
        return [math.nan] * len(SUMMARY_COLUMNS)
    sd = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return [float(np.mean(values)), sd] + [float(np.percentile(values, q)) for q in _PCTS]


def pool_summaries(rows: list[PanelRow]) -> dict[str, pd.DataFrame]:
    """Pooled distribution of the structural parameters and long-run impacts.

    The parameter table adds the share of windows whose absolute t-value
    exceeds two; the long-run table covers only stationary windows and
    reports how many were dropped.
    """
    if not rows:
        raise ValueError("no rows to summarize")
    n_states = len(rows[0].ret_vols)

    params = {}
    share = {}

    def add(name: str, values: np.ndarray, tstats: np.ndarray | None):
        params[name] = _summary_row(values)
        if tstats is not None:
            finite = tstats[np.isfinite(tstats)]
            share[name] = float(np.mean(np.abs(finite) > 2.0)) if finite.size else math.nan
        else:
            share[name] = math.nan

    pi = np.array([r.price_impact for r in rows])
    pi_t = np.array([r.price_impact / r.price_impact_se for r in rows])
    add("price_impact", pi, pi_t)
    fi = np.array([r.flow_impact for r in rows])
    fi_t = np.array([r.flow_impact / r.flow_impact_se for r in rows])
    add("flow_impact", fi, fi_t)
    for s in range(n_states):
        rv = np.array([r.ret_vols[s] for r in rows])
        rt = np.array([r.ret_vols[s] / r.ret_vol_ses[s] for r in rows])
        add(f"ret_vol_{s}", rv, rt)
    for s in range(n_states):
        fv = np.array([r.flow_vols[s] for r in rows])
        ft = np.array([r.flow_vols[s] / r.flow_vol_ses[s] for r in rows])
        add(f"flow_vol_{s}", fv, ft)

    param_df = pd.DataFrame.from_dict(params, orient="index", columns=SUMMARY_COLUMNS)
    param_df["share_sig"] = pd.Series(share)

    lr_rows = [r for r in rows if r.long_run is not None]
    lr = {}
    for pos, name in enumerate(["longrun_rr", "longrun_rf", "longrun_fr", "longrun_ff"]):
        lr[name] = _summary_row(np.array([r.long_run[pos] for r in lr_rows]))
    lr_df = pd.DataFrame.from_dict(lr, orient="index", columns=SUMMARY_COLUMNS)
    lr_df.attrs["n_used"] = len(lr_rows)
    lr_df.attrs["n_dropped_nonstationary"] = len(rows) - len(lr_rows)
    return {"params": param_df, "long_run": lr_df}


@dataclasses.dataclass(frozen=True)
class AnnouncementRecord:
    date: str
    time: str
    name: str
    actual: float
    consensus: float

    @property
    def below_consensus(self) -> bool:
        return self.actual < self.consensus


@dataclasses.dataclass
class AnnouncementCalendar:
    """Scheduled release records with consensus comparisons."""

    records: list[AnnouncementRecord]

    def release_intervals(
        self, date: str, interval_seconds: int, n_intervals: int, session_open: str
    ) -> tuple[set[int], set[int]]:
        """Interval indices containing any release / any below-consensus
        release for one date; releases outside the session are ignored."""
        open_s = parse_clock(session_open)
        any_idx: set[int] = set()
        neg_idx: set[int] = set()
        for rec in self.records:
            if rec.date != date:
                continue
            offset = parse_clock(rec.time) - open_s
            if not (0 <= offset < interval_seconds * n_intervals):
                continue
            idx = int(offset // interval_seconds)
            any_idx.add(idx)
            if rec.below_consensus:
                neg_idx.add(idx)
        return any_idx, neg_idx


CALENDAR_HEADER = ["date", "time", "name", "actual", "consensus"]


def read_calendar_csv(path: str) -> AnnouncementCalendar:
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
            if header and header[0].startswith("#"):
                header = next(reader)
        except StopIteration:
            raise InputFormatError(f"{path}: empty calendar") from None
        if [h.strip() for h in header] != CALENDAR_HEADER:
            raise InputFormatError(f"{path}: bad header {header!r}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 5:
                raise InputFormatError("expected 5 fields", line=lineno)
            try:
                records.append(
                    AnnouncementRecord(
                        date=row[0].strip(),
                        time=row[1].strip(),
                        name=row[2].strip(),
                        actual=float(row[3]),
                        consensus=float(row[4]),
                    )
                )
            except ValueError as exc:
                raise InputFormatError(f"bad record {row!r}", line=lineno) from exc
    return AnnouncementCalendar(records)


@dataclasses.dataclass
class RegressionResult:
    """Cluster-robust least squares output."""

    terms: list[str]
    coef: np.ndarray
    se: np.ndarray
    t: np.ndarray
    p: np.ndarray
    r2: float
    adj_r2: float
    nobs: int
    n_clusters: int
    dropped_obs: int = 0
    dropped_terms: tuple[str, ...] = ()

    def stars(self, i: int) -> str:
        if self.p[i] < 0.01:
            return "***"
        if self.p[i] < 0.05:
            return "**"
        if self.p[i] < 0.1:
            return "*"
        return ""

    def by_term(self) -> dict[str, tuple[float, float, float, float]]:
        return {
            name: (float(self.coef[i]), float(self.se[i]), float(self.t[i]), float(self.p[i]))
            for i, name in enumerate(self.terms)
        }


def clustered_ols(
    y: np.ndarray,
    x: np.ndarray,
    cluster_ids: np.ndarray,
    names: list[str],
) -> RegressionResult:
    """Least squares with one-way cluster-robust standard errors.

    Point estimates are plain least squares; the covariance is the cluster
    sandwich with small-sample factor G/(G-1) * (N-1)/(N-K) and p-values use
    a t distribution on G-1 degrees of freedom.

    Raises
    ------
    CollinearityError
        Rank-deficient regressors; the error names the dependent columns.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    n, k = x.shape
    if len(names) != k:
        raise ValueError("names length must match column count")
    if n <= k:
        raise InsufficientSampleError(f"{n} observations for {k} parameters")

    _, r, piv = scipy.linalg.qr(x, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag[0] * max(n, k) * np.finfo(float).eps if diag.size else 0.0
    rank = int(np.sum(diag > tol))
    if rank < k:
        dependent = [names[j] for j in sorted(piv[rank:])]
        raise CollinearityError(
            f"rank {rank} < {k} columns; dependent: {', '.join(dependent)}",
            columns=dependent,
        )

    beta, _, _, _ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ beta
    xtx_inv = np.linalg.inv(x.T @ x)

    clusters = pd.unique(cluster_ids)
    g = len(clusters)
    if g < 2:
        raise InsufficientSampleError("need at least two clusters")
    meat = np.zeros((k, k))
    for c in clusters:
        mask = cluster_ids == c
        score = x[mask].T @ resid[mask]
        meat += np.outer(score, score)
    factor = (g / (g - 1.0)) * ((n - 1.0) / (n - k))
    cov = factor * xtx_inv @ meat @ xtx_inv
    # rank(meat) <= g, so roundoff can leave tiny negative diagonals
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    with np.errstate(divide="ignore", invalid="ignore"):
        tvals = beta / se
    pvals = 2.0 * scipy.stats.t.sf(np.abs(tvals), df=g - 1)

    tss = float(np.sum((y - y.mean()) ** 2))
    ssr = float(np.sum(resid**2))
    r2 = 1.0 - ssr / tss if tss > 0 else math.nan
    adj = 1.0 - (1.0 - r2) * (n - 1.0) / (n - k) if tss > 0 else math.nan
    return RegressionResult(
        terms=list(names),
        coef=beta,
        se=se,
        t=tvals,
        p=pvals,
        r2=r2,
        adj_r2=adj,
        nobs=n,
        n_clusters=g,
    )


ANN_TERMS_ANY = ["ann_pre2", "ann_pre1", "ann_rel", "ann_post1"]
ANN_TERMS_NEG = ["annmiss_rel", "annmiss_post1", "annmiss_post2"]
ACTIVITY_TERMS = ["inv_depth", "ne_millions", "ase_thousands", "spr"]


def _announcement_columns(
    dates: np.ndarray,
    intervals: np.ndarray,
    calendar: AnnouncementCalendar,
    interval_seconds: int,
    n_intervals: int,
    session_open: str,
) -> dict[str, np.ndarray]:
    """Lead/lag dummies relative to release time.

    ``ann_preK`` marks observations K intervals before a release (the release
    lies K intervals in the future), ``ann_postK`` K intervals after;
    ``ann_rel`` is the release interval itself.  ``annmiss`` columns repeat
    the pattern for releases whose actual printed below consensus.
    """
    cols = {name: np.zeros(len(dates)) for name in ANN_TERMS_ANY + ANN_TERMS_NEG}
    cache: dict[str, tuple[set[int], set[int]]] = {}
    for i, (date, tau) in enumerate(zip(dates, intervals)):
        if date not in cache:
            cache[date] = calendar.release_intervals(
                date, interval_seconds, n_intervals, session_open
            )
        any_idx, neg_idx = cache[date]
        t = int(tau)
        cols["ann_pre2"][i] = float(t + 2 in any_idx)
        cols["ann_pre1"][i] = float(t + 1 in any_idx)
        cols["ann_rel"][i] = float(t in any_idx)
        cols["ann_post1"][i] = float(t - 1 in any_idx)
        cols["annmiss_rel"][i] = float(t in neg_idx)
        cols["annmiss_post1"][i] = float(t - 1 in neg_idx)
        cols["annmiss_post2"][i] = float(t - 2 in neg_idx)
    return cols


def _assemble(
    frame: pd.DataFrame,
    depvar: str,
    n_intervals: int,
    dummy_prefix: str,
) -> tuple[np.ndarray, np.ndarray, list[str], np.ndarray, int, tuple[str, ...]]:
    """Design matrix: intercept, announcement terms, activity covariates,
    time-of-day dummies (first interval is the base).  Drops rows with any
    undefined value and announcement columns without variation."""
    used = [depvar] + ANN_TERMS_ANY + ANN_TERMS_NEG + ACTIVITY_TERMS
    clean = frame.dropna(subset=used)
    dropped_obs = len(frame) - len(clean)

    names = ["const"]
    cols = [np.ones(len(clean))]
    dropped_terms = []
    for term in ANN_TERMS_ANY + ANN_TERMS_NEG:
        col = clean[term].to_numpy()
        if np.ptp(col) == 0.0:
            dropped_terms.append(term)
            continue
        names.append(term)
        cols.append(col)
    if dropped_terms:
        logger.warning("dropping constant announcement terms: %s", ", ".join(dropped_terms))
    for term in ACTIVITY_TERMS:
        names.append(term)
        cols.append(clean[term].to_numpy())
    tau = clean["interval"].to_numpy().astype(int)
    for q in range(1, n_intervals):
        names.append(f"{dummy_prefix}{q:02d}")
        cols.append((tau == q).astype(float))

    x = np.column_stack(cols)
    y = clean[depvar].to_numpy()
    clusters = clean["date"].to_numpy()
    return y, x, names, clusters, dropped_obs, tuple(dropped_terms)


def announcement_regressions(
    rows: list[PanelRow],
    calendar: AnnouncementCalendar,
    spec: WindowSpec | None = None,
    session_seconds: int | None = None,
) -> dict[str, RegressionResult]:
    """The four release-effect regressions.

    Window-frequency regressions explain the two impact coefficients; the
    shock volatilities are explained at the sub-interval frequency with the
    covariates re-aggregated over exactly that sub-interval.  Standard
    errors cluster by date throughout.
    """
    spec = spec or WindowSpec()
    if not rows:
        raise ValueError("no rows")
    n_sec = session_seconds
    if n_sec is None:
        n_sec = (max(r.window_index for r in rows) + 1) * spec.window_seconds
    n_windows = spec.windows_per_day(n_sec)
    n_subs = n_windows * spec.n_regimes

    win = pd.DataFrame(
        {
            "date": [r.date for r in rows],
            "interval": [r.window_index for r in rows],
            "price_impact": [r.price_impact for r in rows],
            "flow_impact": [r.flow_impact for r in rows],
            "inv_depth": [r.inv_depth for r in rows],
            "ne_millions": [r.ne_millions for r in rows],
            "ase_thousands": [r.ase_thousands for r in rows],
            "spr": [r.spr for r in rows],
        }
    )
    win_ann = _announcement_columns(
        win["date"].to_numpy(),
        win["interval"].to_numpy(),
        calendar,
        spec.window_seconds,
        n_windows,
        spec.session_open,
    )
    for name, col in win_ann.items():
        win[name] = col

    sub_records = []
    for r in rows:
        for s in range(spec.n_regimes):
            sub_records.append(
                {
                    "date": r.date,
                    "interval": r.window_index * spec.n_regimes + s,
                    "ret_vol": r.ret_vols[s],
                    "flow_vol": r.flow_vols[s],
                    "inv_depth": r.sub_inv_depth[s],
                    "ne_millions": r.sub_ne_millions[s],
                    "ase_thousands": r.sub_ase_thousands[s],
                    "spr": r.sub_spr[s],
                }
            )
    sub = pd.DataFrame(sub_records)
    sub_ann = _announcement_columns(
        sub["date"].to_numpy(),
        sub["interval"].to_numpy(),
        calendar,
        spec.sub_seconds,
        n_subs,
        spec.session_open,
    )
    for name, col in sub_ann.items():
        sub[name] = col

    out: dict[str, RegressionResult] = {}
    for depvar, frame, n_int, prefix in (
        ("price_impact", win, n_windows, "tod_w"),
        ("flow_impact", win, n_windows, "tod_w"),
        ("ret_vol", sub, n_subs, "tod_s"),
        ("flow_vol", sub, n_subs, "tod_s"),
    ):
        y, x, names, clusters, dropped, dropped_terms = _assemble(frame, depvar, n_int, prefix)
        result = clustered_ols(y, x, clusters, names)
        result.dropped_obs = dropped
        result.dropped_terms = dropped_terms
        out[depvar] = result
    return out


def format_regression_table(result: RegressionResult, title: str) -> str:
    """Aligned text rendering with significance stars."""
    width = max(len(t) for t in result.terms) + 2
    lines = [
        title,
        f"observations: {result.nobs}   clusters: {result.n_clusters}   "
        f"adj R2: {result.adj_r2:.4f}   dropped rows: {result.dropped_obs}",
        f"{'term':<{width}}{'coef':>12}{'se':>12}{'t':>9}{'p':>9}  sig",
    ]
    for i, term in enumerate(result.terms):
        lines.append(
            f"{term:<{width}}{result.coef[i]:>12.4f}{result.se[i]:>12.4f}"
            f"{result.t[i]:>9.2f}{result.p[i]:>9.4f}  {result.stars(i)}"
        )
    if result.dropped_terms:
        lines.append(f"dropped (no variation): {', '.join(result.dropped_terms)}")
    return "\n".join(lines)


def panel_columns(n_states: int) -> list[str]:
    """Column order of the flattened window panel for ``n_states`` regimes."""
    cols = [
        "date", "window_index", "window_id", "start_second", "lag_order", "nobs",
        "price_impact", "price_impact_se", "price_impact_t",
        "flow_impact", "flow_impact_se", "flow_impact_t",
        "j_stat", "j_pvalue", "stationary", "spectral_radius",
        "inv_depth", "ne_millions", "ase_thousands", "spr",
    ]
    for s in range(n_states):
        cols += [f"ret_vol_{s}", f"ret_vol_se_{s}", f"flow_vol_{s}", f"flow_vol_se_{s}"]
    return cols + ["longrun_rr", "longrun_rf", "longrun_fr", "longrun_ff"]


SUBINTERVAL_COLUMNS = [
    "date", "window_index", "sub_index", "interval",
    "ret_vol", "ret_vol_se", "flow_vol", "flow_vol_se",
    "inv_depth", "ne_millions", "ase_thousands", "spr",
]


def panel_frame(rows: list[PanelRow]) -> pd.DataFrame:
    """Flatten estimated windows for delimited output."""
    records = []
    for r in rows:
        rec = {
            "date": r.date,
            "window_index": r.window_index,
            "window_id": r.window_id,
            "start_second": r.start_second,
            "lag_order": r.lag_order,
            "nobs": r.nobs,
            "price_impact": r.price_impact,
            "price_impact_se": r.price_impact_se,
            "price_impact_t": r.price_impact_t,
            "flow_impact": r.flow_impact,
            "flow_impact_se": r.flow_impact_se,
            "flow_impact_t": r.flow_impact_t,
            "j_stat": r.j_stat,
            "j_pvalue": r.j_pvalue,
            "stationary": r.stationary,
            "spectral_radius": r.spectral_radius,
            "inv_depth": r.inv_depth,
            "ne_millions": r.ne_millions,
            "ase_thousands": r.ase_thousands,
            "spr": r.spr,
        }
        for s in range(len(r.ret_vols)):
            rec[f"ret_vol_{s}"] = r.ret_vols[s]
            rec[f"ret_vol_se_{s}"] = r.ret_vol_ses[s]
            rec[f"flow_vol_{s}"] = r.flow_vols[s]
            rec[f"flow_vol_se_{s}"] = r.flow_vol_ses[s]
        for pos, name in enumerate(["longrun_rr", "longrun_rf", "longrun_fr", "longrun_ff"]):
            rec[name] = r.long_run[pos] if r.long_run is not None else math.nan
        records.append(rec)
    if not records:
        return pd.DataFrame(columns=panel_columns(0))
    return pd.DataFrame.from_records(records, columns=panel_columns(len(rows[0].ret_vols)))


def subinterval_frame(rows: list[PanelRow], spec: WindowSpec | None = None) -> pd.DataFrame:
    """One record per window sub-interval with its own covariates."""
    spec = spec or WindowSpec()
    records = []
    for r in rows:
        for s in range(len(r.ret_vols)):
            records.append(
                {
                    "date": r.date,
                    "window_index": r.window_index,
                    "sub_index": s,
                    "interval": r.window_index * spec.n_regimes + s,
                    "ret_vol": r.ret_vols[s],
                    "ret_vol_se": r.ret_vol_ses[s],
                    "flow_vol": r.flow_vols[s],
                    "flow_vol_se": r.flow_vol_ses[s],
                    "inv_depth": r.sub_inv_depth[s],
                    "ne_millions": r.sub_ne_millions[s],
                    "ase_thousands": r.sub_ase_thousands[s],
                    "spr": r.sub_spr[s],
                }
            )
    return pd.DataFrame.from_records(records, columns=SUBINTERVAL_COLUMNS)
