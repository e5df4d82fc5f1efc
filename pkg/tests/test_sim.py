"""Tests for the synthetic generators and their attached ground truth."""

import math

import numpy as np
import pytest
import scipy.stats

from flowimpact import (
    BboSimConfig,
    ConfigError,
    SimConfig,
    aggregate_seconds,
    fit_var,
    population_regime_covs,
    population_state_moments,
    simulate_bbo,
    simulate_session_days,
    simulate_svar,
    SessionSimConfig,
)


def base_config(**kw):
    kw.setdefault("price_impact", 0.6)
    kw.setdefault("flow_impact", 0.2)
    kw.setdefault("ret_vols", (0.5, 1.0, 0.8))
    kw.setdefault("flow_vols", (0.3, 0.4, 0.5))
    return SimConfig(**kw)


def test_population_covs_match_hand_formula():
    cfg = base_config()
    b_inv = np.linalg.inv(np.array([[1.0, -0.6], [-0.2, 1.0]]))
    covs = population_regime_covs(cfg)
    for s, cov in enumerate(covs):
        omega = np.diag([cfg.ret_vols[s] ** 2, cfg.flow_vols[s] ** 2])
        assert cov == pytest.approx(b_inv @ omega @ b_inv.T, rel=1e-12)
    ms = population_state_moments(cfg, nobs=777)
    for s, m in enumerate(ms):
        assert (m.var_ret, m.var_flow, m.cov) == pytest.approx(
            (covs[s][0, 0], covs[s][1, 1], covs[s][0, 1]), rel=1e-12
        )
        assert m.nobs == 777 and m.state == s


def test_sample_covariance_matches_population():
    cfg = base_config(seed=21)
    res = simulate_svar(cfg, n_per_regime=50_000)
    for s, cov in enumerate(res.innovation_covs):
        block = res.y[res.regimes == s]
        sample = np.cov(block, rowvar=False)
        assert sample == pytest.approx(cov, rel=0.05)


def test_diagonal_case_uncorrelated():
    cfg = base_config(price_impact=0.0, flow_impact=0.0, seed=4)
    res = simulate_svar(cfg, n_per_regime=40_000)
    for s in range(3):
        block = res.y[res.regimes == s]
        corr = np.corrcoef(block, rowvar=False)[0, 1]
        assert abs(corr) < 0.02
        assert np.var(block[:, 0]) == pytest.approx(cfg.ret_vols[s] ** 2, rel=0.05)


def test_fixed_seed_reproducible():
    a = simulate_svar(base_config(seed=9), n_per_regime=500)
    b = simulate_svar(base_config(seed=9), n_per_regime=500)
    assert np.array_equal(a.y, b.y)
    c = simulate_svar(base_config(seed=10), n_per_regime=500)
    assert not np.array_equal(a.y, c.y)


def test_regime_labels_and_lengths():
    res = simulate_svar(base_config(), n_per_regime=(100, 200, 300))
    assert res.y.shape == (600, 2)
    assert np.array_equal(res.regimes, np.repeat([0, 1, 2], [100, 200, 300]))
    with pytest.raises(ConfigError, match="mismatch"):
        simulate_svar(base_config(), n_per_regime=(100, 200))
    with pytest.raises(ConfigError, match="lengths"):
        simulate_svar(base_config())
    cfg = base_config(regime_lengths=(50, 60, 70))
    assert simulate_svar(cfg).y.shape == (180, 2)


def test_dynamics_recovered_by_var_fit():
    a1 = ((0.30, 0.10), (0.05, 0.20))
    cfg = base_config(ret_vols=(0.7,), flow_vols=(0.4,), lag_mats=(a1,), seed=33)
    res = simulate_svar(cfg, n_per_regime=60_000)
    fit = fit_var(res.y, max_lag=3)
    assert fit.lag_order == 1
    assert fit.lag_mats[0] == pytest.approx(res.reduced_lag_mats[0], abs=0.02)
    assert fit.intercept == pytest.approx(res.reduced_intercept, abs=0.02)
    sample = np.cov(fit.residuals, rowvar=False)
    assert sample == pytest.approx(res.innovation_covs[0], rel=0.05)


def test_student_t_variance_standardized():
    cfg = base_config(
        price_impact=0.0, flow_impact=0.0, ret_vols=(0.5,), flow_vols=(0.3,),
        dist="student_t", t_dof=5.0, seed=12,
    )
    res = simulate_svar(cfg, n_per_regime=200_000)
    assert np.var(res.y[:, 0]) == pytest.approx(0.25, rel=0.03)
    assert np.var(res.y[:, 1]) == pytest.approx(0.09, rel=0.03)
    # dof 5 leaves clearly positive excess kurtosis after standardization
    assert scipy.stats.kurtosis(res.y[:, 0]) > 1.0


def test_config_validation():
    with pytest.raises(ConfigError, match="singular"):
        base_config(price_impact=2.0, flow_impact=0.5)
    with pytest.raises(ConfigError, match="equal length"):
        base_config(ret_vols=(0.5, 1.0), flow_vols=(0.3,))
    with pytest.raises(ConfigError, match="positive"):
        base_config(ret_vols=(0.5, 0.0, 0.8))
    with pytest.raises(ConfigError, match="dist"):
        base_config(dist="cauchy")
    with pytest.raises(ConfigError, match="dof"):
        base_config(dist="student_t", t_dof=2.0)
    with pytest.raises(ConfigError, match="length mismatch"):
        base_config(regime_lengths=(100,))


def test_nonstationary_dynamics_rejected():
    hot = ((1.1, 0.0), (0.0, 0.2))
    with pytest.raises(ConfigError, match="non-stationary"):
        base_config(price_impact=0.0, flow_impact=0.0, lag_mats=(hot,))
    cfg = base_config(
        price_impact=0.0, flow_impact=0.0, lag_mats=(hot,), require_stationary=False
    )
    assert simulate_svar(cfg, n_per_regime=50).y.shape == (150, 2)


def test_unidentifiable_population_rejected():
    # price_impact zero with nonzero flow feedback makes (var_ret, cov)
    # proportional in every regime no matter how the volatility ratios move
    with pytest.raises(ConfigError, match="proportional"):
        SimConfig(
            price_impact=0.0,
            flow_impact=0.4,
            ret_vols=(0.5, 0.5),
            flow_vols=(0.3, 0.6),
        )


def test_bbo_aggregation_matches_generator_truth():
    events, truth = simulate_bbo(BboSimConfig(duration_seconds=120, seed=7))
    got = aggregate_seconds(events, n_seconds=120, date=truth.date)
    for field in ("ret_bps", "flow_thousands", "n_events", "ase_hundreds", "spread", "depth_thousands"):
        a, b = got.array(field), truth.array(field)
        both = ~(np.isnan(a) | np.isnan(b))
        assert np.array_equal(np.isnan(a), np.isnan(b)), field
        assert a[both] == pytest.approx(b[both], abs=1e-12), field


def test_bbo_event_stream_well_formed():
    events, _ = simulate_bbo(BboSimConfig(duration_seconds=90, seed=15))
    ts = [e.timestamp for e in events]
    assert ts == sorted(ts)
    assert all(e.ask_price - e.bid_price >= 0.25 - 1e-12 for e in events)
    assert all(e.bid_size >= 1 and e.ask_size >= 1 for e in events)


def test_bbo_frozen_book():
    events, truth = simulate_bbo(
        BboSimConfig(duration_seconds=30, size_max=0, price_move_prob=0.0, seed=2)
    )
    assert len({(e.bid_price, e.ask_price, e.bid_size, e.ask_size) for e in events}) == 1
    got = aggregate_seconds(events, n_seconds=30, date=truth.date)
    assert np.all(got.array("flow_thousands") == 0.0)
    assert np.all(got.array("ret_bps") == 0.0)
    assert np.all(np.isnan(got.array("depth_thousands")))


def test_bbo_deterministic():
    a, _ = simulate_bbo(BboSimConfig(seed=5))
    b, _ = simulate_bbo(BboSimConfig(seed=5))
    assert a == b


def test_bbo_config_validation():
    with pytest.raises(ConfigError):
        BboSimConfig(duration_seconds=0)
    with pytest.raises(ConfigError):
        BboSimConfig(start_spread_ticks=0)
    with pytest.raises(ConfigError):
        BboSimConfig(price_move_prob=1.5)


def small_session(**kw):
    kw.setdefault("n_days", 2)
    kw.setdefault("seconds_per_day", 3600)
    kw.setdefault("window_seconds", 900)
    kw.setdefault("sub_seconds", 300)
    return SessionSimConfig(**kw)


def test_session_days_shapes_and_truth():
    cfg = small_session(seed=3)
    sessions, truth, calendar = simulate_session_days(cfg)
    assert [s.date for s in sessions] == ["2024-01-01", "2024-01-02"]
    assert all(s.n_seconds == 3600 and len(s.bars) == 3600 for s in sessions)
    assert calendar == []
    day = truth["2024-01-01"]
    assert day["price_impact"] == cfg.price_impact
    assert len(day["ret_vol_by_sub"]) == 12
    # the sub-interval cycle guarantees within-window heteroskedasticity
    v = day["ret_vol_by_sub"]
    assert v[0] != v[1] and v[1] != v[2]


def test_session_announcement_scaling_and_calendar():
    cfg = small_session(ann_days=(0,), ann_sub_index=6, below_consensus_days=(0,), seed=3)
    sessions, truth, calendar = simulate_session_days(cfg)
    ann = truth["2024-01-01"]
    plain = truth["2024-01-02"]
    assert ann["announcement"] and not plain["announcement"]
    assert ann["ret_vol_by_sub"][6] == pytest.approx(plain["ret_vol_by_sub"][6] * 1.5)
    assert ann["flow_vol_by_sub"][6] == pytest.approx(plain["flow_vol_by_sub"][6] * 0.7)
    assert ann["ret_vol_by_sub"][5] == pytest.approx(plain["ret_vol_by_sub"][5])
    (row,) = calendar
    assert row["date"] == "2024-01-01" and row["name"] == "release"
    # sub 6 starts 1800 s after the 08:30:00 open
    assert row["time"] == "09:00:00"
    assert row["actual"] < row["consensus"]


def test_session_sample_volatility_tracks_truth():
    cfg = small_session(n_days=1, seed=8)
    (session,), truth, _ = simulate_session_days(cfg)
    day = truth["2024-01-01"]
    b = np.array([[1.0, -cfg.price_impact], [-cfg.flow_impact, 1.0]])
    y = np.column_stack((session.array("ret_bps"), session.array("flow_thousands")))
    shocks = y @ b.T
    for sub in (0, 5, 11):
        block = shocks[sub * 300 : (sub + 1) * 300]
        assert np.std(block[:, 0]) == pytest.approx(day["ret_vol_by_sub"][sub], rel=0.15)
        assert np.std(block[:, 1]) == pytest.approx(day["flow_vol_by_sub"][sub], rel=0.15)


def test_session_config_validation():
    with pytest.raises(ConfigError, match="whole windows"):
        small_session(seconds_per_day=1000)
    with pytest.raises(ConfigError, match="sub-intervals"):
        small_session(sub_seconds=400)
    with pytest.raises(ConfigError, match="out of range"):
        small_session(ann_days=(5,))
    with pytest.raises(ConfigError, match="out of range"):
        small_session(ann_days=(0,), ann_sub_index=40)
