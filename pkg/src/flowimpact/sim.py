"""Synthetic data generators with ground truth attached.

Two layers: a structural series generator used to verify the estimation
stack (known impacts, known regime volatilities, optional lag dynamics), and
a best-quote stream generator whose own bookkeeping of flow, depth, and
spread provides an exact oracle for the aggregation code.  A session-level
wrapper assembles whole simulated trading days, optionally planting
announcement effects, for end-to-end protocol runs.
"""

from __future__ import annotations

import dataclasses
import datetime
import math

import numpy as np

from .bbo import BboEvent, SecondBar, SessionSeries
from .dynamics import companion_spectral_radius
from .errors import ConfigError
from .ith import StateMoments

__all__ = [
    "SimConfig",
    "SimResult",
    "simulate_svar",
    "population_regime_covs",
    "population_state_moments",
    "BboSimConfig",
    "simulate_bbo",
    "SessionSimConfig",
    "simulate_session_days",
]


@dataclasses.dataclass(frozen=True)
class SimConfig:
    """Structural generator configuration.

    The system is B y = c + sum_j lag_mats[j] y_{t-j-1} + shock with
    B = [[1, -price_impact], [-flow_impact, 1]] and independent shocks whose
    standard deviations (ret_vols[s], flow_vols[s]) switch across regimes.
    ``dist`` selects Gaussian or variance-standardized Student-t shocks.
    """

    price_impact: float
    flow_impact: float
    ret_vols: tuple[float, ...]
    flow_vols: tuple[float, ...]
    regime_lengths: tuple[int, ...] | None = None
    lag_mats: tuple = ()
    intercept: tuple[float, float] = (0.0, 0.0)
    dist: str = "gaussian"
    t_dof: float = 5.0
    seed: int = 0
    require_stationary: bool = True

    def __post_init__(self):
        if len(self.ret_vols) != len(self.flow_vols):
            raise ConfigError("ret_vols and flow_vols must have equal length")
        if len(self.ret_vols) < 1:
            raise ConfigError("need at least one regime")
        if any(v <= 0 for v in self.ret_vols) or any(v <= 0 for v in self.flow_vols):
            raise ConfigError("shock volatilities must be positive")
        if abs(1.0 - self.price_impact * self.flow_impact) < 1e-12:
            raise ConfigError("price_impact * flow_impact = 1 makes the system singular")
        if self.dist not in ("gaussian", "student_t"):
            raise ConfigError(f"unknown dist {self.dist!r}")
        if self.dist == "student_t" and self.t_dof <= 2:
            raise ConfigError("student_t needs dof > 2 for finite variance")
        if self.regime_lengths is not None:
            if len(self.regime_lengths) != len(self.ret_vols):
                raise ConfigError("regime_lengths length mismatch")
            if any(n <= 0 for n in self.regime_lengths):
                raise ConfigError("regime lengths must be positive")
        if self.require_stationary and len(self.lag_mats) > 0:
            rho = companion_spectral_radius(np.array(self.reduced_lag_mats()))
            if rho >= 1.0:
                raise ConfigError(f"reduced-form dynamics non-stationary (radius {rho:.4f})")
        self._assert_population_rank()

    @property
    def n_regimes(self) -> int:
        return len(self.ret_vols)

    def impact_matrix(self) -> np.ndarray:
        return np.array([[1.0, -self.price_impact], [-self.flow_impact, 1.0]])

    def impact_inverse(self) -> np.ndarray:
        det = 1.0 - self.price_impact * self.flow_impact
        return np.array([[1.0, self.price_impact], [self.flow_impact, 1.0]]) / det

    def reduced_lag_mats(self) -> list[np.ndarray]:
        b_inv = self.impact_inverse()
        return [b_inv @ np.asarray(m, dtype=float) for m in self.lag_mats]

    def reduced_intercept(self) -> np.ndarray:
        return self.impact_inverse() @ np.asarray(self.intercept, dtype=float)

    def _assert_population_rank(self):
        """When regime volatility ratios differ and the system induces any
        correlation, the generator's own population moments must satisfy the
        pairwise non-proportionality condition."""
        S = self.n_regimes
        if S < 2:
            return
        covs = population_regime_covs(self)
        ratios = [self.ret_vols[s] / self.flow_vols[s] for s in range(S)]
        ratios_differ = max(ratios) - min(ratios) > 1e-12 * max(ratios)
        any_corr = any(abs(c[0, 1]) > 1e-300 for c in covs)
        if not (ratios_differ and any_corr):
            return
        for i in range(S):
            for j in range(i + 1, S):
                det = covs[i][0, 0] * covs[j][0, 1] - covs[j][0, 0] * covs[i][0, 1]
                scale = covs[i][0, 0] * abs(covs[j][0, 1]) + covs[j][0, 0] * abs(covs[i][0, 1])
                if scale > 0 and abs(det) / scale < 1e-10:
                    raise ConfigError(
                        f"regimes {i},{j} have proportional population covariances; "
                        "identification would fail despite differing volatility ratios"
                    )


def population_regime_covs(config: SimConfig) -> list[np.ndarray]:
    """Innovation covariance per regime: B^-1 diag(w_r^2, w_f^2) B^-T."""
    b_inv = config.impact_inverse()
    out = []
    for s in range(config.n_regimes):
        omega = np.diag([config.ret_vols[s] ** 2, config.flow_vols[s] ** 2])
        out.append(b_inv @ omega @ b_inv.T)
    return out


def population_state_moments(config: SimConfig, nobs: int = 10_000) -> list[StateMoments]:
    """Exact innovation moments per regime packaged for the identification
    stack; useful for detector tests free of sampling noise."""
    out = []
    for s, cov in enumerate(population_regime_covs(config)):
        out.append(
            StateMoments(
                state=s,
                var_ret=float(cov[0, 0]),
                var_flow=float(cov[1, 1]),
                cov=float(cov[0, 1]),
                nobs=nobs,
            )
        )
    return out


@dataclasses.dataclass
class SimResult:
    """Simulated series plus everything an estimator test needs to score
    itself: regime labels and the true reduced-form parameters."""

    y: np.ndarray
    regimes: np.ndarray
    reduced_intercept: np.ndarray
    reduced_lag_mats: np.ndarray
    innovation_covs: list[np.ndarray]
    config: SimConfig


def _standard_shocks(rng: np.random.Generator, n: int, config: SimConfig) -> np.ndarray:
    if config.dist == "gaussian":
        return rng.standard_normal((n, 2))
    z = rng.standard_t(config.t_dof, size=(n, 2))
    return z * math.sqrt((config.t_dof - 2.0) / config.t_dof)


def simulate_svar(config: SimConfig, n_per_regime: int | tuple[int, ...] | None = None) -> SimResult:
    """Draw one path of the structural system.

    ``n_per_regime`` overrides the config's regime lengths (an int applies to
    every regime).  Dynamics warm up over a burn-in of 100 per lag order,
    drawn with the first regime's volatilities and discarded.  Output is
    deterministic for a fixed seed (PCG64 generator).
    """
    if n_per_regime is None:
        if config.regime_lengths is None:
            raise ConfigError("no regime lengths given")
        lengths = tuple(config.regime_lengths)
    elif isinstance(n_per_regime, int):
        lengths = (n_per_regime,) * config.n_regimes
    else:
        lengths = tuple(n_per_regime)
        if len(lengths) != config.n_regimes:
            raise ConfigError("n_per_regime length mismatch")

    S = config.n_regimes
    n = sum(lengths)
    regimes = np.repeat(np.arange(S), lengths)
    p = len(config.lag_mats)
    burn = 100 * p

    rng = np.random.default_rng(config.seed)
    z = _standard_shocks(rng, burn + n, config)
    scale = np.empty((burn + n, 2))
    scale[:burn, 0] = config.ret_vols[0]
    scale[:burn, 1] = config.flow_vols[0]
    scale[burn:, 0] = np.array(config.ret_vols)[regimes]
    scale[burn:, 1] = np.array(config.flow_vols)[regimes]
    shocks = z * scale

    b_inv = config.impact_inverse()
    eta = shocks @ b_inv.T
    c_red = config.reduced_intercept()
    phis = config.reduced_lag_mats()

    if p == 0:
        y_all = c_red + eta
    else:
        y_all = np.empty((burn + n, 2))
        hist = np.zeros((p, 2))
        for t in range(burn + n):
            acc = c_red + eta[t]
            for j in range(p):
                acc = acc + phis[j] @ hist[j]
            y_all[t] = acc
            if p > 1:
                hist[1:] = hist[:-1]
            hist[0] = acc

    return SimResult(
        y=y_all[burn:],
        regimes=regimes,
        reduced_intercept=c_red,
        reduced_lag_mats=np.array(phis) if p else np.zeros((0, 2, 2)),
        innovation_covs=population_regime_covs(config),
        config=config,
    )


@dataclasses.dataclass(frozen=True)
class BboSimConfig:
    """Best-quote stream generator settings.

    Quotes follow a tick random walk that never crosses and never narrows
    the spread below one tick.  ``price_move_prob`` zero together with
    ``size_max`` zero freezes the book entirely (constant quotes, zero
    flow).  Sizes are integer contracts in 1..size_max.
    """

    duration_seconds: int = 60
    events_per_second: float = 5.0
    price_move_prob: float = 0.2
    tick: float = 0.25
    start_bid_ticks: int = 8000
    start_spread_ticks: int = 2
    size_max: int = 40
    start_bid_size: int = 20
    start_ask_size: int = 20
    seed: int = 0
    date: str = "2024-01-02"

    def __post_init__(self):
        if self.duration_seconds <= 0:
            raise ConfigError("duration must be positive")
        if not (0.0 <= self.price_move_prob <= 1.0):
            raise ConfigError("price_move_prob must be in [0, 1]")
        if self.size_max < 0 or self.start_bid_size <= 0 or self.start_ask_size <= 0:
            raise ConfigError("sizes must be positive (size_max may be 0 to freeze)")
        if self.start_spread_ticks < 1:
            raise ConfigError("start spread must be at least one tick")


def _truth_second_bar(t, ret, flow, ne, displaced, spread_sum, carried_spread,
                      bid_num, bid_den, ask_num, ask_den) -> SecondBar:
    spr = spread_sum / ne if ne > 0 else carried_spread
    terms = []
    if bid_den > 0:
        terms.append(bid_num / bid_den)
    if ask_den > 0:
        terms.append(ask_num / ask_den)
    depth = sum(terms) / len(terms) if terms else math.nan
    ase = displaced / ne if ne > 0 else math.nan
    return SecondBar(
        t=t,
        ret_bps=ret,
        flow_thousands=flow / 1e3,
        n_events=ne,
        ase_hundreds=ase / 1e2 if ne > 0 else math.nan,
        spread=spr,
        depth_thousands=depth / 1e3 if not math.isnan(depth) else math.nan,
    )


def simulate_bbo(config: BboSimConfig) -> tuple[list[BboEvent], SessionSeries]:
    """Generate a quote stream plus its exact per-second ground truth.

    The truth series is built from the generator's own knowledge of each
    move (posted size, cancelled size, direction), not from the indicator
    formula the aggregation code applies, so agreement between the two is a
    real check.  Flow conservation and the one-tick spread floor hold by
    construction.
    """
    rng = np.random.default_rng(config.seed)
    n_sec = config.duration_seconds

    bid_ticks = config.start_bid_ticks
    ask_ticks = bid_ticks + config.start_spread_ticks
    bid_size = float(config.start_bid_size)
    ask_size = float(config.start_ask_size)

    def price(ticks: int) -> float:
        return ticks * config.tick

    def draw_size() -> float:
        if config.size_max <= 0:
            return bid_size  # frozen book; caller only uses this when mutating
        return float(rng.integers(1, config.size_max + 1))

    events: list[BboEvent] = []
    seq = 0

    # per-second truth accumulators
    flow = np.zeros(n_sec)
    ne = np.zeros(n_sec, dtype=int)
    displaced = np.zeros(n_sec)
    spread_sum = np.zeros(n_sec)
    bid_num = np.zeros(n_sec)
    bid_den = np.zeros(n_sec)
    ask_num = np.zeros(n_sec)
    ask_den = np.zeros(n_sec)
    last_mid = np.full(n_sec, math.nan)
    last_spread = np.full(n_sec, math.nan)

    def record_book(sec: int):
        spread = price(ask_ticks) - price(bid_ticks)
        spread_sum[sec] += spread
        last_mid[sec] = 0.5 * (price(bid_ticks) + price(ask_ticks))
        last_spread[sec] = spread

    counts = rng.poisson(config.events_per_second, size=n_sec)
    if counts.sum() == 0:
        counts[0] = 1  # always at least the initializing snapshot

    first = True
    for sec in range(n_sec):
        k = int(counts[sec])
        if k == 0:
            continue
        offsets = np.sort(rng.random(k)) * 0.999
        for off in offsets:
            seq += 1
            ts = sec + float(off)
            if first:
                first = False
                ne[sec] += 1
                record_book(sec)
                events.append(
                    BboEvent(ts, seq, price(bid_ticks), bid_size, price(ask_ticks), ask_size)
                )
                continue

            frozen = config.size_max <= 0
            move_price = (not frozen) and rng.random() < config.price_move_prob
            if move_price:
                side = rng.integers(0, 2)  # 0 bid, 1 ask
                up = bool(rng.integers(0, 2))
                spread_ticks = ask_ticks - bid_ticks
                if side == 0:
                    if up and spread_ticks < 2:
                        up = False  # cannot narrow below one tick
                    old = bid_size
                    bid_ticks += 1 if up else -1
                    bid_size = draw_size()
                    if up:
                        flow[sec] += bid_size
                        bid_num[sec] += old
                    else:
                        flow[sec] -= old
                        bid_num[sec] += bid_size
                    bid_den[sec] += 1.0
                    displaced[sec] += bid_size
                else:
                    if (not up) and spread_ticks < 2:
                        up = True
                    old = ask_size
                    ask_ticks += 1 if up else -1
                    ask_size = draw_size()
                    if up:
                        flow[sec] += old
                        ask_num[sec] += ask_size
                    else:
                        flow[sec] -= ask_size
                        ask_num[sec] += old
                    ask_den[sec] += 1.0
                    displaced[sec] += ask_size
            elif not frozen:
                if rng.integers(0, 2) == 0:
                    old = bid_size
                    bid_size = draw_size()
                    flow[sec] += bid_size - old
                    displaced[sec] += abs(bid_size - old)
                else:
                    old = ask_size
                    ask_size = draw_size()
                    flow[sec] -= ask_size - old
                    displaced[sec] += abs(ask_size - old)
            # frozen book: the event repeats the standing quotes, net zero

            ne[sec] += 1
            record_book(sec)
            events.append(
                BboEvent(ts, seq, price(bid_ticks), bid_size, price(ask_ticks), ask_size)
            )

    bars: list[SecondBar] = []
    carried_mid = math.nan
    carried_spread = math.nan
    prev_mid = math.nan
    for t in range(n_sec):
        if not math.isnan(last_mid[t]):
            carried_mid = last_mid[t]
            carried_spread = last_spread[t]
        if math.isnan(prev_mid) or math.isnan(carried_mid):
            ret = 0.0
        else:
            ret = (math.log(carried_mid) - math.log(prev_mid)) * 1e4
        prev_mid = carried_mid
        bars.append(
            _truth_second_bar(
                t, ret, flow[t], int(ne[t]), displaced[t], spread_sum[t],
                carried_spread, bid_num[t], bid_den[t], ask_num[t], ask_den[t],
            )
        )
    truth = SessionSeries(date=config.date, bars=bars, n_seconds=n_sec)
    return events, truth


@dataclasses.dataclass(frozen=True)
class SessionSimConfig:
    """Whole-day generator for protocol and regression tests.

    Volatilities follow a deterministic intraday pattern: a U-shaped profile
    across the day times a short cycle across the three sub-intervals of
    each window, guaranteeing within-window heteroskedasticity.  On
    announcement days the release sub-interval's volatilities are scaled by
    (ann_ret_scale, ann_flow_scale).  Activity fields (events, size, spread,
    depth) are filled with mildly varying positive noise so covariate
    regressions are well posed.
    """

    n_days: int = 2
    seconds_per_day: int = 23_400
    window_seconds: int = 900
    sub_seconds: int = 300
    price_impact: float = 0.8
    flow_impact: float = 0.3
    base_ret_vol: float = 0.6
    base_flow_vol: float = 0.3
    lag_mats: tuple = ()
    intercept: tuple[float, float] = (0.0, 0.0)
    ret_cycle: tuple[float, ...] = (1.0, 1.35, 0.75)
    flow_cycle: tuple[float, ...] = (0.9, 1.0, 1.25)
    u_shape: float = 0.5
    ann_days: tuple[int, ...] = ()
    ann_sub_index: int = 6
    ann_ret_scale: float = 1.5
    ann_flow_scale: float = 0.7
    ann_name: str = "release"
    below_consensus_days: tuple[int, ...] = ()
    depth_mean: float = 0.16
    ne_mean: float = 45.0
    ase_mean: float = 0.15
    spr_mean: float = 0.25
    start_date: str = "2024-01-01"
    session_open: str = "08:30:00"
    seed: int = 0

    def __post_init__(self):
        if self.seconds_per_day % self.window_seconds != 0:
            raise ConfigError("day must split into whole windows")
        if self.window_seconds % self.sub_seconds != 0:
            raise ConfigError("window must split into whole sub-intervals")
        if any(d >= self.n_days or d < 0 for d in self.ann_days):
            raise ConfigError("announcement day index out of range")
        n_subs = self.seconds_per_day // self.sub_seconds
        if self.ann_days and not (0 <= self.ann_sub_index < n_subs):
            raise ConfigError("announcement sub-interval out of range")


def _sub_multiplier(cfg: SessionSimConfig, sub: int, n_subs: int, cycle: tuple[float, ...]) -> float:
    x = sub / max(n_subs - 1, 1)
    u = 1.0 + cfg.u_shape * ((2.0 * x - 1.0) ** 2 - 0.5)
    return u * cycle[sub % len(cycle)]


def simulate_session_days(cfg: SessionSimConfig):
    """Simulate ``n_days`` sessions of one-second bars with known parameters.

    Returns (sessions, truth, calendar_rows): truth maps each day to the
    per-sub-interval shock volatilities actually used plus the constant
    impacts; calendar_rows list announcement records (empty when no
    announcement days are configured).
    """
    rng = np.random.default_rng(cfg.seed)
    n_subs = cfg.seconds_per_day // cfg.sub_seconds
    b_inv = np.array(
        [[1.0, cfg.price_impact], [cfg.flow_impact, 1.0]]
    ) / (1.0 - cfg.price_impact * cfg.flow_impact)
    phis = [b_inv @ np.asarray(m, dtype=float) for m in cfg.lag_mats]
    c_red = b_inv @ np.asarray(cfg.intercept, dtype=float)
    p = len(phis)

    start = datetime.date.fromisoformat(cfg.start_date)
    open_parts = cfg.session_open.split(":")
    open_seconds = int(open_parts[0]) * 3600 + int(open_parts[1]) * 60 + int(float(open_parts[2]))

    sessions: list[SessionSeries] = []
    truth: dict[str, dict] = {}
    calendar_rows: list[dict] = []

    for day in range(cfg.n_days):
        date = (start + datetime.timedelta(days=day)).isoformat()
        ret_vol_by_sub = np.empty(n_subs)
        flow_vol_by_sub = np.empty(n_subs)
        for sub in range(n_subs):
            ret_vol_by_sub[sub] = cfg.base_ret_vol * _sub_multiplier(cfg, sub, n_subs, cfg.ret_cycle)
            flow_vol_by_sub[sub] = cfg.base_flow_vol * _sub_multiplier(cfg, sub, n_subs, cfg.flow_cycle)
        is_ann = day in cfg.ann_days
        if is_ann:
            ret_vol_by_sub[cfg.ann_sub_index] *= cfg.ann_ret_scale
            flow_vol_by_sub[cfg.ann_sub_index] *= cfg.ann_flow_scale
            release_second = cfg.ann_sub_index * cfg.sub_seconds + open_seconds
            hh, rem = divmod(release_second, 3600)
            mm, ss = divmod(rem, 60)
            below = day in cfg.below_consensus_days
            calendar_rows.append(
                {
                    "date": date,
                    "time": f"{hh:02d}:{mm:02d}:{ss:02d}",
                    "name": cfg.ann_name,
                    "actual": -0.1 if below else 0.1,
                    "consensus": 0.0,
                }
            )

        n = cfg.seconds_per_day
        sub_of_second = np.arange(n) // cfg.sub_seconds
        z = rng.standard_normal((n, 2))
        shocks = z * np.column_stack(
            (ret_vol_by_sub[sub_of_second], flow_vol_by_sub[sub_of_second])
        )
        eta = shocks @ b_inv.T
        if p == 0:
            y = c_red + eta
        else:
            y = np.empty((n, 2))
            hist = np.zeros((p, 2))
            for t in range(n):
                acc = c_red + eta[t]
                for j in range(p):
                    acc = acc + phis[j] @ hist[j]
                y[t] = acc
                if p > 1:
                    hist[1:] = hist[:-1]
                hist[0] = acc

        ne = rng.poisson(cfg.ne_mean, size=n).astype(int)
        ase = np.abs(rng.normal(cfg.ase_mean, 0.2 * cfg.ase_mean, size=n))
        spr = cfg.spr_mean * (1.0 + 0.15 * np.abs(rng.standard_normal(n)))
        depth = cfg.depth_mean * (
            1.0 + 0.25 * np.sin(2 * np.pi * sub_of_second / n_subs) + 0.1 * rng.standard_normal(n)
        )
        depth = np.maximum(depth, 0.05 * cfg.depth_mean)

        bars = [
            SecondBar(
                t=t,
                ret_bps=float(y[t, 0]),
                flow_thousands=float(y[t, 1]),
                n_events=int(ne[t]),
                ase_hundreds=float(ase[t]) if ne[t] > 0 else math.nan,
                spread=float(spr[t]),
                depth_thousands=float(depth[t]),
            )
            for t in range(n)
        ]
        sessions.append(SessionSeries(date=date, bars=bars, n_seconds=n))
        truth[date] = {
            "price_impact": cfg.price_impact,
            "flow_impact": cfg.flow_impact,
            "ret_vol_by_sub": ret_vol_by_sub.tolist(),
            "flow_vol_by_sub": flow_vol_by_sub.tolist(),
            "announcement": bool(is_ann),
        }
    return sessions, truth, calendar_rows
