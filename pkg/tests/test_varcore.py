"""Tests for the per-window autoregression and residual moment extraction."""

import numpy as np
import pytest
import scipy.linalg

from flowimpact import (
    DegenerateWindowError,
    InsufficientSampleError,
    RegimePartition,
    VarFit,
    check_rank,
    fit_var,
    residual_moments,
)


def simulate_var(intercept, lag_mats, chol, n, rng, burn=200):
    """Direct recursion with Gaussian innovations, burn-in discarded."""
    p = len(lag_mats)
    y = np.zeros((n + burn + p, 2))
    for t in range(p, n + burn + p):
        acc = intercept.copy()
        for j, a in enumerate(lag_mats):
            acc = acc + a @ y[t - 1 - j]
        y[t] = acc + chol @ rng.standard_normal(2)
    return y[burn + p :]


A1 = np.array([[0.45, 0.15], [0.10, 0.35]])
A2 = np.array([[0.30, -0.12], [0.08, 0.25]])
CHOL = np.linalg.cholesky(np.array([[1.0, 0.3], [0.3, 0.8]]))
MU = np.array([0.5, -0.2])


def test_var2_coefficients_recovered_within_mc_error():
    rng = np.random.default_rng(11)
    reps, n = 30, 2500
    picks, a1s, a2s, mus = [], [], [], []
    for _ in range(reps):
        y = simulate_var(MU, [A1, A2], CHOL, n, rng)
        fit = fit_var(y, max_lag=4)
        picks.append(fit.lag_order)
        if fit.lag_order == 2:
            a1s.append(fit.lag_mats[0])
            a2s.append(fit.lag_mats[1])
            mus.append(fit.intercept)
    assert np.mean(np.array(picks) == 2) >= 0.9
    for draws, truth in ((a1s, A1), (a2s, A2), (mus, MU)):
        arr = np.array(draws)
        se = arr.std(axis=0, ddof=1) / np.sqrt(len(draws))
        assert np.all(np.abs(arr.mean(axis=0) - truth) <= 3 * se + 1e-12)


def test_white_noise_selects_lag_zero():
    rng = np.random.default_rng(3)
    y = rng.standard_normal((4000, 2))
    fit = fit_var(y, max_lag=6)
    assert fit.lag_order == 0
    assert fit.lag_mats.shape == (0, 2, 2)
    assert fit.nobs == 4000


def test_selected_aic_is_minimum():
    rng = np.random.default_rng(7)
    y = simulate_var(MU, [A1, A2], CHOL, 1500, rng)
    fit = fit_var(y, max_lag=5)
    finite = fit.aic_by_lag[np.isfinite(fit.aic_by_lag)]
    assert fit.aic <= finite.min() + 1e-15
    assert fit.aic_by_lag.shape == (6,)


def test_residuals_orthogonal_to_regressors():
    rng = np.random.default_rng(19)
    y = simulate_var(MU, [A1], CHOL, 1200, rng)
    fit = fit_var(y, max_lag=3)
    p = fit.lag_order
    cols = [np.ones(fit.nobs)]
    for j in range(p):
        cols.append(y[p - 1 - j : len(y) - 1 - j])
    x = np.column_stack(cols)
    cross = x.T @ fit.residuals
    scale = np.linalg.norm(x) * np.linalg.norm(fit.residuals)
    assert np.linalg.norm(cross) / scale < 1e-8


def test_residual_indexing_matches_window_seconds():
    rng = np.random.default_rng(23)
    y = simulate_var(MU, [A1], CHOL, 900, rng)
    fit = fit_var(y, max_lag=2)
    p = fit.lag_order
    # residual i reproduces y[p + i] minus its fitted value
    pred = fit.intercept.copy()
    for j in range(p):
        pred = pred + fit.lag_mats[j] @ y[p - 1 - j]
    assert fit.residuals[0] == pytest.approx(y[p] - pred, abs=1e-12)
    assert fit.nobs == fit.window_len - p


def test_r_squared_matches_lyapunov_population_value():
    rng = np.random.default_rng(31)
    sigma = CHOL @ CHOL.T
    gamma0 = scipy.linalg.solve_discrete_lyapunov(A1, sigma)
    pop_r2 = 1.0 - np.diag(sigma) / np.diag(gamma0)
    y = simulate_var(np.zeros(2), [A1], CHOL, 60_000, rng)
    fit = fit_var(y, max_lag=3)
    assert fit.r_squared == pytest.approx(pop_r2, abs=0.01)


def test_short_window_rejected():
    y = np.random.default_rng(0).standard_normal((42, 2))
    with pytest.raises(InsufficientSampleError, match="42"):
        fit_var(y, max_lag=10)
    # n must exceed twice the widest parameter count, 2 * (2 * 10 + 1)
    fit_var(np.random.default_rng(0).standard_normal((43, 2)), max_lag=10)


def test_constant_window_rejected():
    y = np.ones((300, 2))
    with pytest.raises(DegenerateWindowError):
        fit_var(y, max_lag=3)


def test_collinear_series_rejected():
    rng = np.random.default_rng(5)
    a = rng.standard_normal(300)
    y = np.column_stack((a, 2.0 * a))
    with pytest.raises(DegenerateWindowError):
        fit_var(y, max_lag=3)


def test_bad_shape_and_lag_rejected():
    with pytest.raises(ValueError):
        fit_var(np.zeros((100, 3)))
    with pytest.raises(ValueError):
        fit_var(np.zeros((100, 2)), max_lag=-1)


def test_single_state_partition_reproduces_whole_sample_moments():
    rng = np.random.default_rng(41)
    y = simulate_var(MU, [A1], CHOL, 1000, rng)
    fit = fit_var(y, max_lag=2)
    part = RegimePartition(((0, fit.window_len),))
    (m,) = residual_moments(fit, part)
    e = fit.residuals
    assert m.var_ret == pytest.approx(np.mean(e[:, 0] ** 2), rel=1e-12)
    assert m.var_flow == pytest.approx(np.mean(e[:, 1] ** 2), rel=1e-12)
    assert m.cov == pytest.approx(np.mean(e[:, 0] * e[:, 1]), rel=1e-12)
    assert m.nobs == fit.nobs


def test_state_moments_pool_to_whole_sample():
    rng = np.random.default_rng(43)
    y = simulate_var(MU, [A1], CHOL, 900, rng)
    fit = fit_var(y, max_lag=2)
    ms = residual_moments(fit, RegimePartition.nested(900, 3))
    n = sum(m.nobs for m in ms)
    assert n == fit.nobs
    e = fit.residuals
    pooled = (
        sum(m.var_ret * m.nobs for m in ms) / n,
        sum(m.var_flow * m.nobs for m in ms) / n,
        sum(m.cov * m.nobs for m in ms) / n,
    )
    whole = (np.mean(e[:, 0] ** 2), np.mean(e[:, 1] ** 2), np.mean(e[:, 0] * e[:, 1]))
    assert pooled == pytest.approx(whole, rel=1e-12)


def test_sq_cov_matches_sample_fourth_moments():
    rng = np.random.default_rng(47)
    y = simulate_var(MU, [A1], CHOL, 600, rng)
    fit = fit_var(y, max_lag=1)
    (m,) = residual_moments(fit, RegimePartition(((0, 600),)))
    e = fit.residuals
    prods = np.column_stack((e[:, 0] ** 2, e[:, 1] ** 2, e[:, 0] * e[:, 1]))
    assert m.sq_cov == pytest.approx(np.cov(prods, rowvar=False, ddof=0), rel=1e-12)


def test_uncovered_residual_second_rejected():
    rng = np.random.default_rng(53)
    y = simulate_var(MU, [A1], CHOL, 300, rng)
    fit = fit_var(y, max_lag=1)
    with pytest.raises(ValueError, match="partition"):
        residual_moments(fit, RegimePartition(((0, 100),)))


def test_thin_state_rejected():
    rng = np.random.default_rng(59)
    y = simulate_var(MU, [A1], CHOL, 300, rng)
    fit = fit_var(y, max_lag=1)
    part = RegimePartition(((0, 295), (295, 300)))
    with pytest.raises(InsufficientSampleError, match="state 1"):
        residual_moments(fit, part)
    (_, thin) = residual_moments(fit, part, min_state_obs=2)
    assert thin.nobs == 5


def test_replicated_residuals_fail_rank_condition():
    # tiling one block across all states makes every state's moments equal,
    # exactly the homoskedastic case identification must reject
    rng = np.random.default_rng(61)
    block = rng.standard_normal((120, 2))
    fit = VarFit(
        window_id="w",
        lag_order=0,
        intercept=np.zeros(2),
        lag_mats=np.empty((0, 2, 2)),
        residuals=np.tile(block, (3, 1)),
        r_squared=np.zeros(2),
        aic_by_lag=np.array([0.0]),
        nobs=360,
        window_len=360,
    )
    ms = residual_moments(fit, RegimePartition.nested(360, 3))
    assert ms[0].var_ret == pytest.approx(ms[2].var_ret, rel=1e-14)
    assert not check_rank(ms).passed


def test_partition_validation():
    with pytest.raises(ValueError, match="empty"):
        RegimePartition(((5, 5),))
    with pytest.raises(ValueError, match="overlap"):
        RegimePartition(((0, 10), (8, 20)))
    with pytest.raises(ValueError, match="split"):
        RegimePartition.nested(100, 3)
    part = RegimePartition.nested(900, 3)
    assert part.ranges == ((0, 300), (300, 600), (600, 900))
    assert part.state_of(299) == 0 and part.state_of(300) == 1
    assert part.state_of(900) is None
