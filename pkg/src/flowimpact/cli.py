"""Command-line driver for reproducible ingest, simulate, estimate, and
summarize runs.

Every run resolves a single RunConfig (defaults, then flags, then the
optional ``--config`` file, which overrides flags), derives a short hash
from the resolved configuration plus package versions, and stamps that hash
on every output: a ``# run <hash>`` first line on delimited files, a
``run`` key in JSON sidecars, and PNG metadata on figures.  Outputs carry
no timestamps, so rerunning with the same configuration reproduces them
byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import platform
import sys

import matplotlib
import numpy as np
import pandas as pd
import scipy

from . import __version__
from .bbo import (
    SessionSeries,
    aggregate_seconds,
    intraday_profile,
    parse_clock,
    read_bars_csv,
    read_bbo_csv,
    summary_stats,
    write_bars_csv,
)
from .dynamics import IRF_HEADER
from .errors import ConfigError, FlowImpactError, InputFormatError
from .ith import GmmConfig
from .panel import (
    CALENDAR_HEADER,
    WindowSpec,
    announcement_regressions,
    format_regression_table,
    panel_columns,
    panel_frame,
    pool_summaries,
    read_calendar_csv,
    run_protocol,
    subinterval_frame,
)
from .report import (
    announcement_profile,
    irf_summary,
    params_profile,
    render_activity,
    render_announcement,
    render_irf,
    render_params,
)
from .sim import SessionSimConfig, simulate_session_days

logger = logging.getLogger(__name__)

__all__ = ["RunConfig", "build_manifest", "main"]


@dataclasses.dataclass
class RunConfig:
    """Fully resolved options for one run."""

    command: str
    inputs: tuple[str, ...] = ()
    out_dir: str = "."
    calendar: str | None = None
    seed: int = 0
    jobs: int = 1
    window_min: int = 15
    regimes: int = 3
    max_lag: int = 10
    k_max: int = 10
    rank_tol: float = 1e-3
    gmm_max_iter: int = 500
    gmm_tol: float = 1e-10
    gmm_restarts: int = 4
    session_open: str = "08:30:00"
    session_close: str = "15:00:00"
    profile_sec: int = 300
    days: int = 2
    figures: bool = True
    verbose: int = 0
    quiet: bool = False
    sim_overrides: dict = dataclasses.field(default_factory=dict)

    def window_spec(self) -> WindowSpec:
        return WindowSpec(
            window_minutes=self.window_min,
            n_regimes=self.regimes,
            session_open=self.session_open,
            session_close=self.session_close,
        )

    def gmm_config(self) -> GmmConfig:
        return GmmConfig(
            max_iter=self.gmm_max_iter,
            tol=self.gmm_tol,
            restarts=self.gmm_restarts,
            rank_tol=self.rank_tol,
        )


def _as_bool(value, key: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("true", "false", "yes", "no", "1", "0"):
        return value.lower() in ("true", "yes", "1")
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


_COERCERS = {
    "out_dir": str,
    "calendar": str,
    "seed": int,
    "jobs": int,
    "window_min": int,
    "regimes": int,
    "max_lag": int,
    "k_max": int,
    "rank_tol": float,
    "gmm_max_iter": int,
    "gmm_tol": float,
    "gmm_restarts": int,
    "session_open": str,
    "session_close": str,
    "profile_sec": int,
    "days": int,
    "verbose": int,
}

_SIM_FIELDS = {f.name for f in dataclasses.fields(SessionSimConfig)}


def load_config_file(path: str) -> dict:
    """Parse a ``key = value`` file; values are read as JSON when possible."""
    entries: dict = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if not key or not raw:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        try:
            entries[key] = json.loads(raw)
        except json.JSONDecodeError:
            entries[key] = raw
    return entries


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Fold flags and the config file into a RunConfig; the file wins."""
    known = {f.name for f in dataclasses.fields(RunConfig)}
    kwargs = {k: v for k, v in vars(args).items() if k in known and v is not None}
    kwargs["inputs"] = tuple(getattr(args, "inputs", ()) or ())
    cfg = RunConfig(**kwargs)

    path = getattr(args, "config", None)
    if path:
        for key, value in load_config_file(path).items():
            if key in ("figures", "quiet"):
                setattr(cfg, key, _as_bool(value, key))
            elif key in _COERCERS:
                try:
                    setattr(cfg, key, _COERCERS[key](value))
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{key}: bad value {value!r}") from exc
            elif cfg.command == "simulate" and key in _SIM_FIELDS:
                cfg.sim_overrides[key] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
    return cfg


def _versions() -> dict:
    return {
        "python": platform.python_version(),
        "flowimpact": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "matplotlib": matplotlib.__version__,
    }


def build_manifest(cfg: RunConfig) -> dict:
    """Run manifest: command, resolved config, seed, versions, and a hash.

    The hash covers everything in the manifest except results added later,
    so any flag change changes it and reruns reproduce it.
    """
    payload = {
        "command": cfg.command,
        "config": dataclasses.asdict(cfg),
        "seed": cfg.seed,
        "versions": _versions(),
    }
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    payload["hash"] = hashlib.sha256(canon.encode()).hexdigest()[:12]
    return payload


def _write_manifest(manifest: dict, out_dir: str) -> None:
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_frame(frame: pd.DataFrame, path: str, tag: str, index_label: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# run {tag}\n")
        frame.to_csv(fh, index=index_label is not None, index_label=index_label, lineterminator="\n")


def _write_text(text: str, path: str, tag: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"# run {tag}\n")
        fh.write(text)
        if not text.endswith("\n"):
            fh.write("\n")


def _read_sessions(paths: tuple[str, ...]) -> list[SessionSeries]:
    sessions: dict[str, SessionSeries] = {}
    for path in paths:
        for s in read_bars_csv(path):
            if s.date in sessions:
                raise InputFormatError(f"{path}: duplicate date {s.date}")
            sessions[s.date] = s
    return [sessions[d] for d in sorted(sessions)]


def cmd_ingest(cfg: RunConfig) -> int:
    n_seconds = int(round(parse_clock(cfg.session_close) - parse_clock(cfg.session_open)))
    per_date: dict[str, list] = {}
    skipped = 0
    for path in cfg.inputs:
        events, n_skip = read_bbo_csv(path, cfg.session_open, cfg.session_close)
        skipped += n_skip
        for date, evs in events.items():
            if date in per_date:
                raise InputFormatError(f"{path}: duplicate date {date}")
            per_date[date] = evs

    sessions = [aggregate_seconds(per_date[d], n_seconds, date=d) for d in sorted(per_date)]
    for s in sessions:
        logger.info("ingest: %s, %d events, %d bars", s.date, sum(b.n_events for b in s.bars), s.n_seconds)
    logger.info("ingest: %d rows outside session bounds skipped", skipped)

    manifest = build_manifest(cfg)
    tag = manifest["hash"]
    write_bars_csv(sessions, os.path.join(cfg.out_dir, "bars.csv"), run_tag=tag)
    _write_frame(summary_stats(sessions), os.path.join(cfg.out_dir, "summary.csv"), tag, index_label="series")
    profile = intraday_profile(sessions, interval_seconds=cfg.profile_sec)
    _write_frame(profile, os.path.join(cfg.out_dir, "intraday.csv"), tag)
    if cfg.figures:
        render_activity(profile, os.path.join(cfg.out_dir, "activity.png"), run_tag=tag)
    manifest["inputs"] = {"days": len(sessions), "skipped_rows": skipped}
    _write_manifest(manifest, cfg.out_dir)
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    window_seconds = cfg.window_min * 60
    if window_seconds % cfg.regimes != 0:
        raise ConfigError("window does not split into equal sub-intervals")
    sim_kwargs = dict(
        n_days=cfg.days,
        window_seconds=window_seconds,
        sub_seconds=window_seconds // cfg.regimes,
        session_open=cfg.session_open,
        seed=cfg.seed,
    )
    for key, value in cfg.sim_overrides.items():
        sim_kwargs[key] = tuple(value) if isinstance(value, list) else value
    try:
        sim = SessionSimConfig(**sim_kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad simulation setting: {exc}") from exc

    sessions, truth, calendar_rows = simulate_session_days(sim)
    manifest = build_manifest(cfg)
    tag = manifest["hash"]

    write_bars_csv(sessions, os.path.join(cfg.out_dir, "bars.csv"), run_tag=tag)
    calendar = pd.DataFrame(calendar_rows, columns=CALENDAR_HEADER)
    _write_frame(calendar, os.path.join(cfg.out_dir, "calendar.csv"), tag)
    sidecar = {
        "run": tag,
        "price_impact": sim.price_impact,
        "flow_impact": sim.flow_impact,
        "lag_mats": [np.asarray(m, dtype=float).tolist() for m in sim.lag_mats],
        "intercept": list(sim.intercept),
        "window_seconds": sim.window_seconds,
        "sub_seconds": sim.sub_seconds,
        "days": truth,
    }
    with open(os.path.join(cfg.out_dir, "truth.json"), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    logger.info("simulate: %d days, %d announcement records", len(sessions), len(calendar_rows))
    _write_manifest(manifest, cfg.out_dir)
    return 0


def cmd_estimate(cfg: RunConfig) -> int:
    sessions = _read_sessions(cfg.inputs)
    if not sessions:
        raise InputFormatError("no sessions found in inputs")
    calendar = read_calendar_csv(cfg.calendar) if cfg.calendar else None
    spec = cfg.window_spec()

    result = run_protocol(
        sessions,
        spec,
        max_lag=cfg.max_lag,
        gmm_config=cfg.gmm_config(),
        k_max=cfg.k_max,
        jobs=cfg.jobs,
    )
    rows = result.rows

    manifest = build_manifest(cfg)
    tag = manifest["hash"]
    out = cfg.out_dir

    frame = panel_frame(rows) if rows else pd.DataFrame(columns=panel_columns(spec.n_regimes))
    _write_frame(frame, os.path.join(out, "panel.csv"), tag)
    _write_frame(subinterval_frame(rows, spec), os.path.join(out, "subintervals.csv"), tag)
    exc_frame = pd.DataFrame(
        [dataclasses.asdict(e) for e in result.exclusions],
        columns=["date", "window_index", "window_id", "reason", "detail"],
    )
    _write_frame(exc_frame, os.path.join(out, "exclusions.csv"), tag)

    irf_records = []
    for r in rows:
        if r.irfs is not None:
            irf_records.extend(r.irfs.to_rows(r.window_id))
    _write_frame(pd.DataFrame(irf_records, columns=IRF_HEADER), os.path.join(out, "irf.csv"), tag)

    if rows:
        summaries = pool_summaries(rows)
        _write_frame(summaries["params"], os.path.join(out, "summary_params.csv"), tag, index_label="parameter")
        _write_frame(summaries["long_run"], os.path.join(out, "summary_longrun.csv"), tag, index_label="parameter")
        irf_sum = irf_summary(rows)
        _write_frame(irf_sum, os.path.join(out, "irf_summary.csv"), tag)
        win_prof, sub_prof = params_profile(rows, spec)
        _write_frame(win_prof, os.path.join(out, "params_windows.csv"), tag)
        _write_frame(sub_prof, os.path.join(out, "params_subintervals.csv"), tag)
        if cfg.figures:
            render_params(win_prof, sub_prof, os.path.join(out, "params_intraday.png"), run_tag=tag)
            render_irf(irf_sum, os.path.join(out, "irf.png"), run_tag=tag)
    else:
        logger.warning("estimate: no window was estimable; summaries skipped")

    if calendar is not None and rows:
        regs = announcement_regressions(rows, calendar, spec, session_seconds=sessions[0].n_seconds)
        tables = []
        for lhs, res in regs.items():
            tables.append(format_regression_table(res, title=lhs))
            reg_frame = pd.DataFrame(
                {"term": res.terms, "coef": res.coef, "se": res.se, "p": res.p}
            )
            _write_frame(reg_frame, os.path.join(out, f"regression_{lhs}.csv"), tag)
        _write_text("\n".join(tables), os.path.join(out, "regressions.txt"), tag)
        ann_win, ann_sub = announcement_profile(rows, calendar, spec)
        _write_frame(ann_win, os.path.join(out, "announcement_windows.csv"), tag)
        _write_frame(ann_sub, os.path.join(out, "announcement_subintervals.csv"), tag)
        if cfg.figures:
            render_announcement(ann_win, ann_sub, os.path.join(out, "announcement.png"), run_tag=tag)

    manifest["windows"] = {
        "attempted": result.attempted,
        "estimated": len(rows),
        "excluded": len(result.exclusions),
    }
    _write_manifest(manifest, out)
    logger.info(
        "estimate: %d attempted, %d estimated, %d excluded",
        result.attempted, len(rows), len(result.exclusions),
    )
    return 0


def cmd_summarize(cfg: RunConfig) -> int:
    sessions = _read_sessions(cfg.inputs)
    if not sessions:
        raise InputFormatError("no sessions found in inputs")
    manifest = build_manifest(cfg)
    tag = manifest["hash"]
    _write_frame(summary_stats(sessions), os.path.join(cfg.out_dir, "summary.csv"), tag, index_label="series")
    profile = intraday_profile(sessions, interval_seconds=cfg.profile_sec)
    _write_frame(profile, os.path.join(cfg.out_dir, "intraday.csv"), tag)
    if cfg.figures:
        render_activity(profile, os.path.join(cfg.out_dir, "activity.png"), run_tag=tag)
    manifest["inputs"] = {"days": len(sessions)}
    _write_manifest(manifest, cfg.out_dir)
    return 0


_DISPATCH = {
    "ingest": cmd_ingest,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "summarize": cmd_summarize,
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file; its entries override command-line flags")
    p.add_argument("--out-dir", default=".", help="directory for outputs (created if missing)")
    p.add_argument("--seed", type=int, default=0, help="seed for all randomness in the run")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True,
                   help="render PNG figures next to the delimited outputs")
    p.add_argument("--session-open", default="08:30:00")
    p.add_argument("--session-close", default="15:00:00")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("-q", "--quiet", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowimpact",
        description="Structural return and order-flow estimation from book-event data.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse quote updates into one-second bars and activity summaries")
    p.add_argument("inputs", nargs="+", help="quote-update CSV files")
    p.add_argument("--profile-sec", type=int, default=300, help="intraday profile interval length")
    _add_common(p)

    p = sub.add_parser("simulate", help="generate synthetic sessions with known parameters")
    p.add_argument("--days", type=int, default=2, help="number of sessions to simulate")
    p.add_argument("--window-min", type=int, default=15)
    p.add_argument("--regimes", type=int, default=3)
    _add_common(p)

    p = sub.add_parser("estimate", help="run the windowed estimation protocol over bar files")
    p.add_argument("inputs", nargs="+", help="bar CSV files")
    p.add_argument("--calendar", help="announcement calendar CSV (date,time,name,actual,consensus)")
    p.add_argument("--window-min", type=int, default=15, help="window length in minutes")
    p.add_argument("--regimes", type=int, default=3, help="volatility states per window")
    p.add_argument("--max-lag", type=int, default=10, help="largest lag order considered")
    p.add_argument("--k-max", type=int, default=10, help="impulse-response horizon")
    p.add_argument("--rank-tol", type=float, default=1e-3)
    p.add_argument("--gmm-max-iter", type=int, default=500)
    p.add_argument("--gmm-tol", type=float, default=1e-10)
    p.add_argument("--gmm-restarts", type=int, default=4)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="days processed in parallel (default: available cores)")
    _add_common(p)

    p = sub.add_parser("summarize", help="activity summaries and intraday profile from bar files")
    p.add_argument("inputs", nargs="+", help="bar CSV files")
    p.add_argument("--profile-sec", type=int, default=300)
    _add_common(p)

    return parser


def _setup_logging(cfg: RunConfig) -> None:
    if cfg.quiet:
        level = logging.WARNING
    elif cfg.verbose > 0:
        level = logging.DEBUG
    else:
        level = logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        _setup_logging(cfg)
        os.makedirs(cfg.out_dir, exist_ok=True)
        return _DISPATCH[cfg.command](cfg)
    except FlowImpactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
