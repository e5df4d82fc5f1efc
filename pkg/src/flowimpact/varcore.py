"""Reduced-form vector autoregression on (return, flow) second pairs.

Each window gets an equation-by-equation least-squares fit with an intercept
and a lag order chosen by the system Akaike criterion; the residuals are the
reduced-form innovations whose state-by-state second moments feed the
structural identification stage.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import DegenerateWindowError, InsufficientSampleError
from .ith import RegimePartition, StateMoments

__all__ = ["VarFit", "fit_var", "residual_moments"]


@dataclasses.dataclass
class VarFit:
    """Fitted two-variable autoregression for one window.

    ``lag_mats[j]`` multiplies the observation j+1 seconds back; residual i
    corresponds to window second ``lag_order + i``, so the residual count is
    the window length minus the lag order.  ``aic_by_lag`` holds the
    selection-stage criterion per candidate order, computed on a common
    subsample so the values are comparable; non-finite entries mark
    candidates whose regressor matrix was rank deficient.
    """

    window_id: str
    lag_order: int
    intercept: np.ndarray
    lag_mats: np.ndarray
    residuals: np.ndarray
    r_squared: np.ndarray
    aic_by_lag: np.ndarray
    nobs: int
    window_len: int

    @property
    def aic(self) -> float:
        return float(self.aic_by_lag[self.lag_order])


def _design(y: np.ndarray, p: int, start: int) -> tuple[np.ndarray, np.ndarray]:
    """Regressor matrix [1, y_{t-1}, ..., y_{t-p}] and targets for rows
    t = start .. n-1."""
    n = y.shape[0]
    rows = n - start
    x = np.empty((rows, 1 + 2 * p))
    x[:, 0] = 1.0
    for j in range(p):
        x[:, 1 + 2 * j : 3 + 2 * j] = y[start - 1 - j : n - 1 - j]
    return x, y[start:]


def _ols(x: np.ndarray, targets: np.ndarray):
    beta, _, rank, _ = np.linalg.lstsq(x, targets, rcond=None)
    if rank < x.shape[1]:
        return None, None
    resid = targets - x @ beta
    return beta, resid


def fit_var(y: np.ndarray, max_lag: int = 10, window_id: str = "") -> VarFit:
    """Fit the window's autoregression with AIC-selected lag order.

    Candidate orders 0..max_lag are compared on the common subsample that
    drops the first max_lag observations (so every candidate explains the
    same targets); the winner is refit on the full window.  The criterion is
    ln det of the maximum-likelihood residual covariance plus 2k/T with k the
    total parameter count including intercepts.

    Raises
    ------
    InsufficientSampleError
        Window shorter than twice the widest parameter count.
    DegenerateWindowError
        Constant or collinear series leaving no valid candidate, or a
        singular residual covariance at the selected order.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 2 or y.shape[1] != 2:
        raise ValueError("y must be (n, 2)")
    n = y.shape[0]
    if max_lag < 0:
        raise ValueError("max_lag must be >= 0")
    if n <= 2 * (2 * max_lag + 1):
        raise InsufficientSampleError(
            f"window of {n} seconds too short for max_lag={max_lag}"
        )

    t_common = n - max_lag
    aic_by_lag = np.full(max_lag + 1, np.inf)
    for p in range(max_lag + 1):
        x, targets = _design(y, p, max_lag)
        beta, resid = _ols(x, targets)
        if beta is None:
            continue
        sigma = resid.T @ resid / t_common
        det = sigma[0, 0] * sigma[1, 1] - sigma[0, 1] * sigma[1, 0]
        if not np.isfinite(det) or det <= 0:
            continue
        k = 2 * (1 + 2 * p)
        aic_by_lag[p] = float(np.log(det) + 2.0 * k / t_common)

    if not np.isfinite(aic_by_lag).any():
        raise DegenerateWindowError(f"window {window_id or '?'}: no valid lag candidate")
    p_star = int(np.argmin(aic_by_lag))

    x, targets = _design(y, p_star, p_star)
    beta, resid = _ols(x, targets)
    if beta is None:
        raise DegenerateWindowError(f"window {window_id or '?'}: singular design at p={p_star}")
    sigma = resid.T @ resid / resid.shape[0]
    if sigma[0, 0] * sigma[1, 1] - sigma[0, 1] * sigma[1, 0] <= 0:
        raise DegenerateWindowError(f"window {window_id or '?'}: singular residual covariance")

    lag_mats = np.empty((p_star, 2, 2))
    for j in range(p_star):
        lag_mats[j] = beta[1 + 2 * j : 3 + 2 * j].T

    centered = targets - targets.mean(axis=0)
    tss = np.sum(centered**2, axis=0)
    ssr = np.sum(resid**2, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        r2 = np.where(tss > 0, 1.0 - ssr / tss, np.nan)

    return VarFit(
        window_id=window_id,
        lag_order=p_star,
        intercept=beta[0].copy(),
        lag_mats=lag_mats,
        residuals=resid,
        r_squared=r2,
        aic_by_lag=aic_by_lag,
        nobs=resid.shape[0],
        window_len=n,
    )


def residual_moments(
    fit: VarFit,
    partition: RegimePartition,
    min_state_obs: int = 10,
) -> list[StateMoments]:
    """State-by-state second moments of the residuals, taken about zero.

    The partition is expressed in window seconds; residual i belongs to
    second ``lag_order + i``.  Every residual second must fall in exactly one
    range.  Moments about zero keep two identities exact: a single-state
    partition reproduces the whole-window moment matrix, and the
    observation-weighted average over states equals the pooled moments.

    Each state also carries the sample covariance of the squared and cross
    products, the fourth-moment information used for efficient weighting.
    """
    n_resid = fit.residuals.shape[0]
    states = np.empty(n_resid, dtype=int)
    for i in range(n_resid):
        s = partition.state_of(fit.lag_order + i)
        if s is None:
            raise ValueError(
                f"partition does not cover residual second {fit.lag_order + i}"
            )
        states[i] = s

    out: list[StateMoments] = []
    for s in range(partition.n_states):
        e = fit.residuals[states == s]
        if e.shape[0] < min_state_obs:
            raise InsufficientSampleError(
                f"state {s}: {e.shape[0]} residuals < {min_state_obs}"
            )
        prods = np.column_stack((e[:, 0] ** 2, e[:, 1] ** 2, e[:, 0] * e[:, 1]))
        out.append(
            StateMoments(
                state=s,
                var_ret=float(np.mean(prods[:, 0])),
                var_flow=float(np.mean(prods[:, 1])),
                cov=float(np.mean(prods[:, 2])),
                nobs=e.shape[0],
                sq_cov=np.cov(prods, rowvar=False, ddof=0),
            )
        )
    return out
