"""Structural estimation of return and order-flow dynamics from book events.

The pipeline turns best-bid-offer updates into one-second bars, fits a
short-lag vector autoregression per intraday window, identifies the
contemporaneous price and flow impacts from the heteroskedasticity of the
residuals across sub-interval volatility states, and propagates the
structural shocks into impulse responses and announcement-day regressions.
A built-in simulator with known ground truth closes the loop for testing.
"""

from .bbo import (
    BboEvent,
    SecondBar,
    SessionSeries,
    aggregate_seconds,
    compute_event,
    displaced_size,
    intraday_profile,
    read_bars_csv,
    read_bbo_csv,
    summary_stats,
    write_bars_csv,
)
from .dynamics import (
    ImpulseResponseSet,
    companion_spectral_radius,
    impulse_responses,
    long_run_impact,
)
from .errors import (
    BoundaryError,
    CollinearityError,
    ConfigError,
    ConvergenceError,
    CrossedBookError,
    DegenerateWindowError,
    FlowImpactError,
    IdentificationError,
    InputFormatError,
    InsufficientSampleError,
    OrderConditionError,
    RankConditionError,
)
from .ith import (
    GmmConfig,
    RankCheck,
    RegimePartition,
    StateMoments,
    StructuralEstimate,
    StructuralParams,
    check_rank,
    estimate_gmm,
    moment_conditions,
    moment_jacobian,
    significance_flags,
    solve_two_state,
)
from .panel import (
    AnnouncementCalendar,
    AnnouncementRecord,
    ExclusionRecord,
    PanelRow,
    ProtocolResult,
    RegressionResult,
    WindowSpec,
    announcement_regressions,
    clustered_ols,
    format_regression_table,
    panel_frame,
    pool_summaries,
    read_calendar_csv,
    run_protocol,
    subinterval_frame,
)
from .sim import (
    BboSimConfig,
    SessionSimConfig,
    SimConfig,
    SimResult,
    population_regime_covs,
    population_state_moments,
    simulate_bbo,
    simulate_session_days,
    simulate_svar,
)
from .varcore import VarFit, fit_var, residual_moments

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # bars
    "BboEvent", "SecondBar", "SessionSeries", "aggregate_seconds",
    "compute_event", "displaced_size", "intraday_profile",
    "read_bars_csv", "read_bbo_csv", "summary_stats", "write_bars_csv",
    # identification
    "GmmConfig", "RankCheck", "RegimePartition", "StateMoments",
    "StructuralEstimate", "StructuralParams", "check_rank", "estimate_gmm",
    "moment_conditions", "moment_jacobian", "significance_flags", "solve_two_state",
    # autoregression
    "VarFit", "fit_var", "residual_moments",
    # dynamics
    "ImpulseResponseSet", "companion_spectral_radius", "impulse_responses", "long_run_impact",
    # panel
    "AnnouncementCalendar", "AnnouncementRecord", "ExclusionRecord", "PanelRow",
    "ProtocolResult", "RegressionResult", "WindowSpec", "announcement_regressions",
    "clustered_ols", "format_regression_table", "panel_frame", "pool_summaries",
    "read_calendar_csv", "run_protocol", "subinterval_frame",
    # simulation
    "BboSimConfig", "SessionSimConfig", "SimConfig", "SimResult",
    "population_regime_covs", "population_state_moments",
    "simulate_bbo", "simulate_session_days", "simulate_svar",
    # errors
    "FlowImpactError", "InputFormatError", "CrossedBookError",
    "DegenerateWindowError", "InsufficientSampleError", "OrderConditionError",
    "RankConditionError", "IdentificationError", "ConvergenceError",
    "BoundaryError", "CollinearityError", "ConfigError",
]
