"""Structural identification through heteroskedasticity.

The contemporaneous system links one-second returns r and order flow
imbalance f through two impact coefficients:

    r_t = b_r * f_t + shock_r,      f_t = b_f * r_t + shock_f

with mutually uncorrelated shocks whose standard deviations shift across
volatility states while the impacts stay put.  Each state contributes three
covariance restrictions, so S states give 3S equations in 2 + 2S unknowns:
two states identify the system exactly, three or more overidentify it and
support a specification test.

Moment conditions per state s (variances var_r, var_f, covariance cov of the
reduced-form innovations):

    var_r - 2 b_r cov + b_r^2 var_f - w_r[s]^2 = 0
    var_f - 2 b_f cov + b_f^2 var_r - w_f[s]^2 = 0
    b_f var_r - (1 + b_r b_f) cov + b_r var_f = 0

Identification additionally needs the covariance structure to shift across
states in a non-proportional way (the rank condition checked here before any
estimation), and is global only up to a known twin solution that swaps the
roles of the two equations; the solver prefers the branch with
|b_r * b_f| < 1, where the simultaneity feedback is attenuating.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import math

import numpy as np
import scipy.optimize
import scipy.stats

from .errors import (
    BoundaryError,
    ConvergenceError,
    IdentificationError,
    InsufficientSampleError,
    OrderConditionError,
)

__all__ = [
    "StateMoments",
    "RegimePartition",
    "RankCheck",
    "StructuralParams",
    "StructuralEstimate",
    "GmmConfig",
    "check_rank",
    "moment_conditions",
    "moment_jacobian",
    "solve_two_state",
    "estimate_gmm",
    "significance_flags",
]

logger = logging.getLogger(__name__)

SIGNIFICANCE_T = 2.0


@dataclasses.dataclass(frozen=True)
class StateMoments:
    """Second moments of the reduced-form innovations within one state.

    Moments are taken about zero: residuals from an intercept-including fit
    have zero sample mean over the window, which makes single-state moments
    coincide with the whole-window covariance and keeps the sample-size
    weighted pooling identity exact.

    ``sq_cov`` optionally carries the 3x3 sample covariance of the squared
    and cross products (r^2, f^2, r*f); when present it feeds the efficient
    weighting and the standard errors with the data's actual fourth moments,
    otherwise Gaussian-implied values are used.
    """

    state: int
    var_ret: float
    var_flow: float
    cov: float
    nobs: int
    sq_cov: np.ndarray | None = dataclasses.field(default=None, compare=False)

    def __post_init__(self):
        if self.nobs < 1:
            raise InsufficientSampleError(f"state {self.state}: nobs < 1")
        if self.var_ret < 0 or self.var_flow < 0:
            raise ValueError(f"state {self.state}: negative variance")
        bound = math.sqrt(self.var_ret * self.var_flow)
        if abs(self.cov) > bound * (1 + 1e-12) + 1e-300:
            raise ValueError(f"state {self.state}: covariance exceeds variance bound")


@dataclasses.dataclass(frozen=True)
class RegimePartition:
    """Disjoint, ordered half-open second ranges; state = position in list."""

    ranges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        prev_stop = None
        for start, stop in self.ranges:
            if stop <= start:
                raise ValueError(f"empty range ({start}, {stop})")
            if prev_stop is not None and start < prev_stop:
                raise ValueError("ranges overlap or are unordered")
            prev_stop = stop

    @property
    def n_states(self) -> int:
        return len(self.ranges)

    def state_of(self, second: int) -> int | None:
        for s, (start, stop) in enumerate(self.ranges):
            if start <= second < stop:
                return s
        return None

    @staticmethod
    def nested(window_len: int, n_states: int) -> "RegimePartition":
        """Equal contiguous split of a window, the panel protocol's default."""
        if window_len % n_states != 0:
            raise ValueError(f"window of {window_len}s does not split into {n_states} states")
        step = window_len // n_states
        return RegimePartition(tuple((s * step, (s + 1) * step) for s in range(n_states)))


@dataclasses.dataclass(frozen=True)
class RankCheck:
    """Outcome of the pairwise non-proportionality test."""

    passed: bool
    min_normalized_det: float
    worst_pair: tuple[int, int]


def check_rank(moments: list[StateMoments], rel_tol: float = 1e-3) -> RankCheck:
    """Test that covariance shifts across states are not proportional.

    For every state pair the determinant ``var_r' * cov'' - var_r'' * cov'``
    must differ from zero relative to its natural scale
    ``var_r' * |cov''| + var_r'' * |cov'|``; a single proportional (or
    identical) pair defeats identification.  Returns the worst pair and its
    normalized determinant so exclusion reports can quantify how close the
    window was to degeneracy.
    """
    if len(moments) < 2:
        raise OrderConditionError("rank check needs at least two states")
    worst = math.inf
    worst_pair = (moments[0].state, moments[1].state)
    for ma, mb in itertools.combinations(moments, 2):
        det = ma.var_ret * mb.cov - mb.var_ret * ma.cov
        scale = ma.var_ret * abs(mb.cov) + mb.var_ret * abs(ma.cov)
        normalized = abs(det) / scale if scale > 0 else 0.0
        if normalized < worst:
            worst = normalized
            worst_pair = (ma.state, mb.state)
    return RankCheck(passed=worst > rel_tol, min_normalized_det=worst, worst_pair=worst_pair)


@dataclasses.dataclass(frozen=True)
class StructuralParams:
    """Point in parameter space: impacts plus per-state shock volatilities."""

    price_impact: float
    flow_impact: float
    ret_vols: tuple[float, ...]
    flow_vols: tuple[float, ...]

    def __post_init__(self):
        if len(self.ret_vols) != len(self.flow_vols):
            raise ValueError("ret_vols and flow_vols must have equal length")


def moment_conditions(params: StructuralParams, moments: list[StateMoments]) -> np.ndarray:
    """Stacked covariance restrictions, three per state, zero at the truth."""
    if len(params.ret_vols) != len(moments):
        raise ValueError("parameter state count does not match moments")
    br, bf = params.price_impact, params.flow_impact
    out = np.empty(3 * len(moments))
    for i, m in enumerate(moments):
        wr2 = params.ret_vols[i] ** 2
        wf2 = params.flow_vols[i] ** 2
        out[3 * i] = m.var_ret - 2.0 * br * m.cov + br * br * m.var_flow - wr2
        out[3 * i + 1] = m.var_flow - 2.0 * bf * m.cov + bf * bf * m.var_ret - wf2
        out[3 * i + 2] = bf * m.var_ret - (1.0 + br * bf) * m.cov + br * m.var_flow
    return out


def moment_jacobian(params: StructuralParams, moments: list[StateMoments]) -> np.ndarray:
    """Analytic Jacobian of the moment stack.

    Columns follow the natural parameter order (price impact, flow impact,
    per-state return shock vols, per-state flow shock vols); matches central
    finite differences of :func:`moment_conditions`.
    """
    S = len(moments)
    br, bf = params.price_impact, params.flow_impact
    jac = np.zeros((3 * S, 2 + 2 * S))
    for i, m in enumerate(moments):
        jac[3 * i, 0] = -2.0 * m.cov + 2.0 * br * m.var_flow
        jac[3 * i, 2 + i] = -2.0 * params.ret_vols[i]
        jac[3 * i + 1, 1] = -2.0 * m.cov + 2.0 * bf * m.var_ret
        jac[3 * i + 1, 2 + S + i] = -2.0 * params.flow_vols[i]
        jac[3 * i + 2, 0] = -bf * m.cov + m.var_flow
        jac[3 * i + 2, 1] = m.var_ret - br * m.cov
    return jac


@dataclasses.dataclass
class StructuralEstimate:
    """Estimated impacts and shock volatilities with inference metadata.

    ``j_stat`` follows a chi-squared law with S - 2 degrees of freedom under
    correct specification when S >= 3; for an exactly identified two-state
    system it is numerically zero and carries no p-value.
    """

    price_impact: float
    flow_impact: float
    ret_vols: np.ndarray
    flow_vols: np.ndarray
    price_impact_se: float
    flow_impact_se: float
    ret_vol_ses: np.ndarray
    flow_vol_ses: np.ndarray
    objective: float
    j_stat: float
    j_dof: int
    j_pvalue: float
    nobs: int
    method: str
    gradient_norm: float = math.nan

    @property
    def n_states(self) -> int:
        return len(self.ret_vols)

    @property
    def impact_matrix(self) -> np.ndarray:
        """Contemporaneous coefficient matrix B with unit diagonal."""
        return np.array([[1.0, -self.price_impact], [-self.flow_impact, 1.0]])

    def shock_cov(self, state: int) -> np.ndarray:
        return np.diag([self.ret_vols[state] ** 2, self.flow_vols[state] ** 2])

    @property
    def price_impact_t(self) -> float:
        return self.price_impact / self.price_impact_se

    @property
    def flow_impact_t(self) -> float:
        return self.flow_impact / self.flow_impact_se

    def params(self) -> StructuralParams:
        return StructuralParams(
            self.price_impact,
            self.flow_impact,
            tuple(self.ret_vols),
            tuple(self.flow_vols),
        )


def _implied_vols(br: float, bf: float, moments: list[StateMoments]):
    """Squared shock vols implied by the first two restrictions at (br, bf)."""
    wr2 = np.array([m.var_ret - 2 * br * m.cov + br * br * m.var_flow for m in moments])
    wf2 = np.array([m.var_flow - 2 * bf * m.cov + bf * bf * m.var_ret for m in moments])
    return wr2, wf2


def _candidate(br: float, moments: list[StateMoments]):
    """Back out flow impact for a given price impact root; returns
    (bf, discrepancy between the two states' implied values)."""
    ma, mb = moments
    den_a = ma.var_ret - br * ma.cov
    den_b = mb.var_ret - br * mb.cov
    vals = []
    for m, den in ((ma, den_a), (mb, den_b)):
        if abs(den) > 1e-14 * max(m.var_ret, abs(br * m.cov), 1e-300):
            vals.append((m.cov - br * m.var_flow) / den)
    if not vals:
        return math.nan, math.inf
    if len(vals) == 1:
        return vals[0], math.inf
    # use the better-conditioned state for the point value
    bf = vals[0] if abs(den_a) >= abs(den_b) else vals[1]
    return bf, abs(vals[0] - vals[1])


def solve_two_state(moments: list[StateMoments]) -> StructuralEstimate:
    """Closed-form solve of the exactly identified two-state system.

    The two cross restrictions reduce to a quadratic in the price impact

        A x^2 + B x + C = 0,
        A = var_f1 * cov2 - var_f2 * cov1
        B = var_f2 * var_r1 - var_f1 * var_r2
        C = cov1 * var_r2 - cov2 * var_r1

    whose two roots are the twin structural solutions.  Root selection:
    admissible roots (positive implied shock variances, invertible B) first,
    then the attenuating branch |b_r*b_f| < 1, then b_r >= 0, then smallest
    disagreement between the two states' implied flow impacts.  No standard
    errors; use the GMM path for inference.

    Raises
    ------
    IdentificationError
        If the quadratic has no real root or no admissible candidate; the
        exception carries the rejected roots.
    """
    if len(moments) != 2:
        raise OrderConditionError(f"closed form needs exactly 2 states, got {len(moments)}")
    ma, mb = moments
    qa = ma.var_flow * mb.cov - mb.var_flow * ma.cov
    qb = mb.var_flow * ma.var_ret - ma.var_flow * mb.var_ret
    qc = ma.cov * mb.var_ret - mb.cov * ma.var_ret

    scale = max(abs(qb), abs(qc), 1e-300)
    roots: list[float] = []
    if abs(qa) <= 1e-13 * scale:
        if abs(qb) <= 1e-13 * max(abs(qc), 1e-300):
            raise IdentificationError("degenerate quadratic: both leading coefficients vanish")
        roots.append(-qc / qb)
    else:
        disc = qb * qb - 4.0 * qa * qc
        if disc < 0:
            raise IdentificationError("no real root for the price impact quadratic")
        sq = math.sqrt(disc)
        # numerically stable root pairing
        q = -0.5 * (qb + math.copysign(sq, qb if qb != 0 else 1.0))
        r1 = q / qa
        roots.append(r1)
        if q != 0.0:
            r2 = qc / q
            if not math.isclose(r1, r2, rel_tol=1e-12, abs_tol=0.0):
                roots.append(r2)

    candidates = []
    for br in roots:
        if not math.isfinite(br):
            continue
        bf, disagreement = _candidate(br, moments)
        if not math.isfinite(bf):
            continue
        wr2, wf2 = _implied_vols(br, bf, moments)
        admissible = bool(np.all(wr2 > 0) and np.all(wf2 > 0) and abs(1 - br * bf) > 1e-12)
        candidates.append((br, bf, wr2, wf2, admissible, disagreement))

    if not candidates:
        raise IdentificationError("no usable root", roots=roots)
    admissible_set = [c for c in candidates if c[4]]
    if not admissible_set:
        raise IdentificationError(
            "no admissible root (negative implied shock variance)", roots=roots
        )
    admissible_set.sort(
        key=lambda c: (abs(c[0] * c[1]) >= 1.0, c[0] < 0.0, c[5])
    )
    br, bf, wr2, wf2, _, _ = admissible_set[0]

    nan2 = np.full(2, math.nan)
    params = StructuralParams(br, bf, tuple(np.sqrt(wr2)), tuple(np.sqrt(wf2)))
    resid = moment_conditions(params, moments)
    return StructuralEstimate(
        price_impact=br,
        flow_impact=bf,
        ret_vols=np.sqrt(wr2),
        flow_vols=np.sqrt(wf2),
        price_impact_se=math.nan,
        flow_impact_se=math.nan,
        ret_vol_ses=nan2.copy(),
        flow_vol_ses=nan2.copy(),
        objective=float(np.max(np.abs(resid))),
        j_stat=math.nan,
        j_dof=0,
        j_pvalue=math.nan,
        nobs=ma.nobs + mb.nobs,
        method="closed-form",
    )


@dataclasses.dataclass(frozen=True)
class GmmConfig:
    """Tuning knobs for the two-step estimator."""

    max_iter: int = 500
    tol: float = 1e-10
    restarts: int = 4
    rank_tol: float = 1e-3
    vol_floor_factor: float = 1e-8


def _gaussian_sq_cov(m: StateMoments) -> np.ndarray:
    """Isserlis fourth-moment covariance of (r^2, f^2, r*f) under normality."""
    vr, vf, c = m.var_ret, m.var_flow, m.cov
    return np.array(
        [
            [2 * vr * vr, 2 * c * c, 2 * vr * c],
            [2 * c * c, 2 * vf * vf, 2 * vf * c],
            [2 * vr * c, 2 * vf * c, vr * vf + c * c],
        ]
    )


def _moment_mixing(br: float, bf: float) -> np.ndarray:
    """Coefficients writing each restriction as a combination of
    (r^2, f^2, r*f) sample means; the moment covariance is then a congruence
    of the fourth-moment matrix."""
    return np.array(
        [
            [1.0, br * br, -2.0 * br],
            [bf * bf, 1.0, -2.0 * bf],
            [bf, br, -(1.0 + br * bf)],
        ]
    )


def _state_moment_cov(params: StructuralParams, m: StateMoments) -> np.ndarray:
    base = m.sq_cov if m.sq_cov is not None else _gaussian_sq_cov(m)
    mix = _moment_mixing(params.price_impact, params.flow_impact)
    return mix @ base @ mix.T


def _inv_psd(v: np.ndarray) -> np.ndarray:
    ridge = 1e-12 * np.trace(v) / v.shape[0]
    if not np.isfinite(ridge) or ridge <= 0:
        ridge = 1e-300
    return np.linalg.inv(v + ridge * np.eye(v.shape[0]))


def _step2_weights(params: StructuralParams, moments: list[StateMoments]) -> list[np.ndarray]:
    """Per-state weight blocks (n_s / n) * V_s^{-1}; with these the minimized
    objective times total n is the overidentification statistic."""
    n = sum(m.nobs for m in moments)
    blocks = []
    for m in moments:
        v = _state_moment_cov(params, m)
        blocks.append((m.nobs / n) * _inv_psd(v))
    return blocks


def _pack(params: StructuralParams) -> np.ndarray:
    return np.concatenate(
        (
            [params.price_impact, params.flow_impact],
            np.log(params.ret_vols),
            np.log(params.flow_vols),
        )
    )


def _unpack(theta: np.ndarray, S: int) -> StructuralParams:
    return StructuralParams(
        float(theta[0]),
        float(theta[1]),
        tuple(np.exp(theta[2 : 2 + S])),
        tuple(np.exp(theta[2 + S : 2 + 2 * S])),
    )


def _objective_and_grad(theta, moments, blocks):
    S = len(moments)
    params = _unpack(theta, S)
    resid = moment_conditions(params, moments)
    jac = moment_jacobian(params, moments)
    # chain rule: optimizer works in log-vol space
    chain = np.ones(2 + 2 * S)
    chain[2 : 2 + S] = params.ret_vols
    chain[2 + S :] = params.flow_vols
    value = 0.0
    grad_nat = np.zeros(2 + 2 * S)
    for s in range(S):
        rs = resid[3 * s : 3 * s + 3]
        js = jac[3 * s : 3 * s + 3]
        wrs = blocks[s] @ rs
        value += float(rs @ wrs)
        grad_nat += 2.0 * js.T @ wrs
    return value, grad_nat * chain


def _pooled_slope(moments: list[StateMoments]) -> float:
    n = sum(m.nobs for m in moments)
    cov = sum(m.nobs * m.cov for m in moments) / n
    var_f = sum(m.nobs * m.var_flow for m in moments) / n
    return cov / var_f if var_f > 0 else 0.0


def _starting_points(moments: list[StateMoments], config: GmmConfig) -> list[StructuralParams]:
    """Deterministic start list: closed form on the most separated pair,
    then the least-squares slope with zero feedback, then scaled variants."""
    starts: list[StructuralParams] = []
    best_pair = None
    best_sep = -1.0
    for ma, mb in itertools.combinations(moments, 2):
        det = ma.var_ret * mb.cov - mb.var_ret * ma.cov
        scale = ma.var_ret * abs(mb.cov) + mb.var_ret * abs(ma.cov)
        sep = abs(det) / scale if scale > 0 else 0.0
        if sep > best_sep:
            best_sep = sep
            best_pair = (ma, mb)
    if best_pair is not None:
        try:
            two = solve_two_state(list(best_pair))
            starts.append(_clamped_start(two.price_impact, two.flow_impact, moments))
        except (IdentificationError, OrderConditionError):
            pass
    slope = _pooled_slope(moments)
    fallbacks = [(slope, 0.0), (0.5 * slope, 0.1), (1.5 * slope, -0.1), (0.0, 0.0)]
    for br, bf in fallbacks:
        starts.append(_clamped_start(br, bf, moments))
        if len(starts) >= max(config.restarts, 1) + 1:
            break
    return starts


def _clamped_start(br: float, bf: float, moments: list[StateMoments]) -> StructuralParams:
    wr2, wf2 = _implied_vols(br, bf, moments)
    floor_r = 1e-6 * math.sqrt(max(max(m.var_ret for m in moments), 1e-300))
    floor_f = 1e-6 * math.sqrt(max(max(m.var_flow for m in moments), 1e-300))
    wr = np.sqrt(np.maximum(wr2, floor_r**2))
    wf = np.sqrt(np.maximum(wf2, floor_f**2))
    return StructuralParams(br, bf, tuple(wr), tuple(wf))


def _minimize(start: StructuralParams, moments, blocks, config: GmmConfig):
    S = len(moments)
    theta0 = _pack(start)
    scale_r = math.sqrt(max(max(m.var_ret for m in moments), 1e-300))
    scale_f = math.sqrt(max(max(m.var_flow for m in moments), 1e-300))
    lo_r = math.log(config.vol_floor_factor * scale_r)
    lo_f = math.log(config.vol_floor_factor * scale_f)
    hi_r = math.log(1e6 * scale_r)
    hi_f = math.log(1e6 * scale_f)
    bounds = (
        [(None, None), (None, None)]
        + [(lo_r, hi_r)] * S
        + [(lo_f, hi_f)] * S
    )
    res = scipy.optimize.minimize(
        _objective_and_grad,
        theta0,
        args=(moments, blocks),
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": config.max_iter, "ftol": config.tol, "gtol": 1e-12},
    )
    at_floor = bool(
        np.any(res.x[2 : 2 + S] <= lo_r + 1e-9) or np.any(res.x[2 + S :] <= lo_f + 1e-9)
    )
    return res, at_floor


def _run_stage(starts, moments, blocks, config):
    best = None
    best_floor = False
    failures = 0
    for start in starts:
        try:
            res, at_floor = _minimize(start, moments, blocks, config)
        except (ValueError, FloatingPointError):
            failures += 1
            continue
        converged = bool(res.success) or float(np.max(np.abs(res.jac))) < 1e-8
        if not converged:
            failures += 1
        if best is None or res.fun < best.fun:
            best = res
            best_floor = at_floor
        if converged and res.fun < 1e-24:
            break
    if best is None:
        raise ConvergenceError("optimizer failed on every start", best_objective=None)
    if failures == len(starts) and not best.success:
        raise ConvergenceError(
            f"no start converged after {len(starts)} attempts",
            best_objective=float(best.fun),
        )
    return best, best_floor


def estimate_gmm(moments: list[StateMoments], config: GmmConfig | None = None) -> StructuralEstimate:
    """Two-step minimum-distance estimation of the structural parameters.

    Step one minimizes the identity-weighted moment stack from the
    deterministic start list; step two reweights each state's block by the
    inverse of its estimated moment covariance (sample fourth moments when
    the state carries them, Gaussian-implied otherwise) normalized so the
    minimized objective times total observations is the overidentification
    statistic.  Standard errors come from the usual sandwich with the
    analytic Jacobian.  With exactly two states the estimate reproduces the
    closed form and the objective collapses to numerical zero.

    Raises
    ------
    OrderConditionError
        Fewer than two states.
    ConvergenceError
        No start converged; carries the best objective reached.
    BoundaryError
        A shock volatility pinned at its lower bound.
    """
    if config is None:
        config = GmmConfig()
    S = len(moments)
    if S < 2:
        raise OrderConditionError(f"need at least 2 states, got {S}")
    n = sum(m.nobs for m in moments)

    starts = _starting_points(moments, config)
    identity_blocks = [np.eye(3)] * S
    best1, _ = _run_stage(starts, moments, identity_blocks, config)
    params1 = _unpack(best1.x, S)

    blocks = _step2_weights(params1, moments)
    starts2 = [params1] + starts
    best2, at_floor = _run_stage(starts2, moments, blocks, config)
    params2 = _unpack(best2.x, S)

    # twin-solution guard: if the optimizer landed on the amplifying branch,
    # try the mirrored solution and keep whichever fits at least as well
    prod = params2.price_impact * params2.flow_impact
    if abs(prod) > 1.0 and abs(params2.flow_impact) > 1e-12 and abs(params2.price_impact) > 1e-12:
        mirror = _clamped_start(
            1.0 / params2.flow_impact, 1.0 / params2.price_impact, moments
        )
        try:
            res_m, floor_m = _minimize(mirror, moments, blocks, config)
            if res_m.fun <= best2.fun * (1 + 1e-8) + 1e-20:
                best2, at_floor = res_m, floor_m
                params2 = _unpack(best2.x, S)
        except (ValueError, FloatingPointError):
            pass

    # log parameterization never reaches omega = 0 exactly, so treat a fitted
    # variance below 1e-10 of the state's own data scale as pinned too
    scale_r2 = max(m.var_ret for m in moments)
    scale_f2 = max(m.var_flow for m in moments)
    vanished = any(w * w <= 1e-10 * scale_r2 for w in params2.ret_vols) or any(
        w * w <= 1e-10 * scale_f2 for w in params2.flow_vols
    )
    if at_floor or vanished:
        raise BoundaryError("shock volatility pinned at lower bound")

    objective = float(best2.fun)
    j_stat = n * objective
    j_dof = S - 2
    j_pvalue = float(scipy.stats.chi2.sf(j_stat, j_dof)) if j_dof > 0 else math.nan

    # sandwich covariance in the natural parameterization
    jac = moment_jacobian(params2, moments)
    w_full = _block_diag(blocks)
    var_m = _block_diag(
        [_state_moment_cov(params2, m) / m.nobs for m in moments]
    )
    bread = np.linalg.inv(jac.T @ w_full @ jac)
    meat = jac.T @ w_full @ var_m @ w_full @ jac
    cov = bread @ meat @ bread
    ses = np.sqrt(np.maximum(np.diag(cov), 0.0))

    return StructuralEstimate(
        price_impact=params2.price_impact,
        flow_impact=params2.flow_impact,
        ret_vols=np.array(params2.ret_vols),
        flow_vols=np.array(params2.flow_vols),
        price_impact_se=float(ses[0]),
        flow_impact_se=float(ses[1]),
        ret_vol_ses=ses[2 : 2 + S].copy(),
        flow_vol_ses=ses[2 + S :].copy(),
        objective=objective,
        j_stat=j_stat,
        j_dof=j_dof,
        j_pvalue=j_pvalue,
        nobs=n,
        method="gmm-2step",
        gradient_norm=float(np.max(np.abs(best2.jac))),
    )


def _block_diag(blocks: list[np.ndarray]) -> np.ndarray:
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size))
    pos = 0
    for b in blocks:
        k = b.shape[0]
        out[pos : pos + k, pos : pos + k] = b
        pos += k
    return out


def significance_flags(estimate: StructuralEstimate) -> dict[str, bool]:
    """Absolute t-value strictly above two, per parameter."""

    def flag(value: float, se: float) -> bool:
        return bool(se > 0 and math.isfinite(se) and abs(value / se) > SIGNIFICANCE_T)

    flags = {
        "price_impact": flag(estimate.price_impact, estimate.price_impact_se),
        "flow_impact": flag(estimate.flow_impact, estimate.flow_impact_se),
    }
    for s in range(estimate.n_states):
        flags[f"ret_vol_{s}"] = flag(estimate.ret_vols[s], estimate.ret_vol_ses[s])
        flags[f"flow_vol_{s}"] = flag(estimate.flow_vols[s], estimate.flow_vol_ses[s])
    return flags
