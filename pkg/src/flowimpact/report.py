"""Report-path rendering: plot-ready aggregates and their figures.

Each estimate run emits delimited files mirroring the figures (intraday
activity, intraday parameters, impulse-response fan, announcement-day
comparison) and, unless disabled, renders the matching PNG next to each
file.  Rendering is deterministic: fixed style, fixed dpi, metadata limited
to the run tag.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .panel import AnnouncementCalendar, PanelRow, WindowSpec  # noqa: E402

__all__ = [
    "irf_summary",
    "params_profile",
    "announcement_profile",
    "render_activity",
    "render_params",
    "render_irf",
    "render_announcement",
]

_STYLE = {
    "figure.dpi": 150,
    "font.size": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.titlesize": 9,
    "lines.linewidth": 1.2,
}

_CHANNELS = [("rr", 0, 0), ("rf", 0, 1), ("fr", 1, 0), ("ff", 1, 1)]
_CHANNEL_TITLES = {
    "rr": "return to return shock",
    "rf": "return to flow shock",
    "fr": "flow to return shock",
    "ff": "flow to flow shock",
}


def irf_summary(rows: list[PanelRow]) -> pd.DataFrame:
    """Median and 5/95 percentile impulse responses by horizon and channel."""
    usable = [r for r in rows if r.irfs is not None]
    if not usable:
        return pd.DataFrame(
            columns=["k", "channel", "irf_median", "irf_p5", "irf_p95",
                     "cum_median", "cum_p5", "cum_p95"]
        )
    k_max = len(usable[0].irfs.horizons) - 1
    records = []
    for name, i, j in _CHANNELS:
        irf_stack = np.array([r.irfs.irf[:, i, j] for r in usable])
        cum_stack = np.array([r.irfs.cumulative[:, i, j] for r in usable])
        for k in range(k_max + 1):
            records.append(
                {
                    "k": k,
                    "channel": name,
                    "irf_median": float(np.median(irf_stack[:, k])),
                    "irf_p5": float(np.percentile(irf_stack[:, k], 5)),
                    "irf_p95": float(np.percentile(irf_stack[:, k], 95)),
                    "cum_median": float(np.median(cum_stack[:, k])),
                    "cum_p5": float(np.percentile(cum_stack[:, k], 5)),
                    "cum_p95": float(np.percentile(cum_stack[:, k], 95)),
                }
            )
    return pd.DataFrame.from_records(records)


def params_profile(rows: list[PanelRow], spec: WindowSpec | None = None):
    """Time-of-day means of the structural parameters.

    Impacts are averaged per window slot, shock volatilities per
    sub-interval slot.
    """
    spec = spec or WindowSpec()
    win = (
        pd.DataFrame(
            {
                "interval": [r.window_index for r in rows],
                "price_impact": [r.price_impact for r in rows],
                "flow_impact": [r.flow_impact for r in rows],
            }
        )
        .groupby("interval")
        .agg(["mean", "median", "count"])
    )
    win.columns = ["_".join(c) for c in win.columns]
    win = win.reset_index()

    sub_records = []
    for r in rows:
        for s in range(len(r.ret_vols)):
            sub_records.append(
                {
                    "interval": r.window_index * spec.n_regimes + s,
                    "ret_vol": r.ret_vols[s],
                    "flow_vol": r.flow_vols[s],
                }
            )
    sub = (
        pd.DataFrame.from_records(sub_records)
        .groupby("interval")
        .agg(["mean", "median", "count"])
    )
    sub.columns = ["_".join(c) for c in sub.columns]
    sub = sub.reset_index()
    return win, sub


def announcement_profile(
    rows: list[PanelRow],
    calendar: AnnouncementCalendar,
    spec: WindowSpec | None = None,
):
    """Announcement-day versus plain-day time-of-day averages."""
    spec = spec or WindowSpec()
    ann_dates = {rec.date for rec in calendar.records}

    def split_mean(frame: pd.DataFrame, value: str) -> pd.DataFrame:
        out = frame.pivot_table(
            index="interval", columns="is_ann", values=value, aggfunc="mean"
        )
        out = out.rename(columns={True: f"{value}_ann", False: f"{value}_plain"})
        for col in (f"{value}_ann", f"{value}_plain"):
            if col not in out:
                out[col] = math.nan
        return out[[f"{value}_ann", f"{value}_plain"]]

    win = pd.DataFrame(
        {
            "interval": [r.window_index for r in rows],
            "is_ann": [r.date in ann_dates for r in rows],
            "price_impact": [r.price_impact for r in rows],
            "flow_impact": [r.flow_impact for r in rows],
            "inv_depth": [r.inv_depth for r in rows],
            "spr": [r.spr for r in rows],
        }
    )
    win_out = pd.concat(
        [split_mean(win, v) for v in ["price_impact", "flow_impact", "inv_depth", "spr"]],
        axis=1,
    ).reset_index()

    sub_records = []
    for r in rows:
        for s in range(len(r.ret_vols)):
            sub_records.append(
                {
                    "interval": r.window_index * spec.n_regimes + s,
                    "is_ann": r.date in ann_dates,
                    "ret_vol": r.ret_vols[s],
                    "flow_vol": r.flow_vols[s],
                }
            )
    sub = pd.DataFrame.from_records(sub_records)
    sub_out = pd.concat(
        [split_mean(sub, v) for v in ["ret_vol", "flow_vol"]], axis=1
    ).reset_index()
    return win_out, sub_out


def _save(fig, path: str, run_tag: str | None):
    meta = {"Description": f"run {run_tag}"} if run_tag else None
    fig.savefig(path, metadata=meta)
    plt.close(fig)


def render_activity(profile: pd.DataFrame, path: str, run_tag: str | None = None) -> None:
    """Six-panel intraday activity figure from the 5-minute profile."""
    panels = [
        ("sd_r_bps", "return sd (bps)"),
        ("sd_f_thousands", "flow sd (thousand)"),
        ("mean_ne_hundreds", "events (hundred)"),
        ("mean_ase_hundreds", "event size (hundred)"),
        ("mean_spr", "spread (points)"),
        ("mean_depth_thousands", "depth (thousand)"),
    ]
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(2, 3, figsize=(9, 5), constrained_layout=True)
        for ax, (col, title) in zip(axes.flat, panels):
            ax.plot(profile["interval"], profile[col])
            ax.set_title(title)
            ax.set_xlabel("interval of day")
        _save(fig, path, run_tag)


def render_params(win: pd.DataFrame, sub: pd.DataFrame, path: str, run_tag: str | None = None) -> None:
    """Intraday means of impacts (window slots) and volatilities (sub slots)."""
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(2, 2, figsize=(8, 5), constrained_layout=True)
        axes[0, 0].plot(win["interval"], win["price_impact_mean"])
        axes[0, 0].set_title("price impact")
        axes[0, 1].plot(win["interval"], win["flow_impact_mean"])
        axes[0, 1].set_title("flow impact")
        axes[1, 0].plot(sub["interval"], sub["ret_vol_mean"])
        axes[1, 0].set_title("return shock vol")
        axes[1, 1].plot(sub["interval"], sub["flow_vol_mean"])
        axes[1, 1].set_title("flow shock vol")
        for ax in axes.flat:
            ax.set_xlabel("interval of day")
        _save(fig, path, run_tag)


def render_irf(summary: pd.DataFrame, path: str, run_tag: str | None = None) -> None:
    """Median impulse responses with a 5-95 percentile band per channel."""
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(2, 2, figsize=(8, 5), constrained_layout=True)
        for ax, (name, _, _) in zip(axes.flat, _CHANNELS):
            block = summary[summary["channel"] == name]
            ax.fill_between(block["k"], block["irf_p5"], block["irf_p95"], alpha=0.25)
            ax.plot(block["k"], block["irf_median"])
            ax.axhline(0.0, color="black", linewidth=0.6)
            ax.set_title(_CHANNEL_TITLES[name])
            ax.set_xlabel("horizon (seconds)")
        _save(fig, path, run_tag)


def render_announcement(win: pd.DataFrame, sub: pd.DataFrame, path: str, run_tag: str | None = None) -> None:
    """Announcement-day and plain-day intraday parameter paths side by side."""
    panels_win = [("price_impact", "price impact"), ("flow_impact", "flow impact"),
                  ("inv_depth", "inverse depth"), ("spr", "spread")]
    panels_sub = [("ret_vol", "return shock vol"), ("flow_vol", "flow shock vol")]
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(2, 3, figsize=(9, 5), constrained_layout=True)
        flat = list(axes.flat)
        for ax, (col, title) in zip(flat[:4], panels_win):
            ax.plot(win["interval"], win[f"{col}_ann"], label="announcement")
            ax.plot(win["interval"], win[f"{col}_plain"], label="plain")
            ax.set_title(title)
        for ax, (col, title) in zip(flat[4:], panels_sub):
            ax.plot(sub["interval"], sub[f"{col}_ann"], label="announcement")
            ax.plot(sub["interval"], sub[f"{col}_plain"], label="plain")
            ax.set_title(title)
        flat[0].legend(loc="best", fontsize=7)
        for ax in flat:
            ax.set_xlabel("interval of day")
        _save(fig, path, run_tag)
