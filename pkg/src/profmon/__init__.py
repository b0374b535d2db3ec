"""Profile monitoring with conditional p-value charts.

Random functions observed at fixed monitor sites are modeled as
multivariate normal vectors; each incoming profile is scored by per-site
conditional p-values, aggregated, and compared against an order-statistic
control limit whose in-control ARL is exact for any score distribution.
"""

from ._backend import BACKEND_NAME
from .calibration import (
    SCORE_DISTRIBUTIONS,
    BootstrapPlan,
    OrderStatChart,
    RunLengthSummary,
    arl0_exact,
    arl0_series,
    bootstrap_calibrate,
    calibration_report,
    first_alarm_pmf,
    geometric_limit_check,
    no_alarm_prob,
    order_index,
    order_stat_limit,
    simulate_run_lengths,
    willemain_sd,
)
from .competitors import PcaChart, T2Chart, calibrate_to_far, pca_chart_fit, t2_statistic, t2_statistics
from .errors import (
    CalibrationError,
    ConfigError,
    CsvFormatError,
    InfiniteRunLengthError,
    InsufficientSamplesError,
    InvalidOrderIndexError,
    ProfmonError,
    SingularCovarianceError,
    UnsupportedProcessError,
)
from .gaussian import (
    ConditionalLaw,
    GaussianModel,
    ProfileSample,
    conditional_law,
    estimate_moments,
    profile_matrix,
    sample,
)
from .harness import (
    ChartResult,
    CsvMonitorConfig,
    ExperimentConfig,
    RunLengthTable,
    Scenario,
    ScenarioReport,
    config_from_dict,
    config_to_dict,
    emit_report,
    load_config,
    load_profiles_csv,
    monitor_csv,
    parse_report,
    run_scenario,
    runlength_verify,
)
from .monitor import (
    AggregationRule,
    RunLengthRecord,
    SiteStatistics,
    StoppingRule,
    aggregate,
    monitor_stream,
    profile_statistics,
    score_profiles,
    site_p_values,
)
from .processes import (
    SINE_DOMAIN,
    UNIT_DOMAIN,
    BrokenMonitor,
    GlobalShift,
    MonitorGrid,
    MonomialProcess,
    ProcessSpec,
    SineProcess,
    TrajectorySwitch,
    draw_profile,
    draw_profiles,
    grid_from_dict,
    grid_to_dict,
    simulation_study,
    snr_table,
    spec_from_dict,
    spec_to_dict,
    true_model,
)

__version__ = "0.1.0"

__all__ = [
    "AggregationRule",
    "BACKEND_NAME",
    "BootstrapPlan",
    "BrokenMonitor",
    "CalibrationError",
    "ChartResult",
    "ConditionalLaw",
    "ConfigError",
    "CsvFormatError",
    "CsvMonitorConfig",
    "ExperimentConfig",
    "GaussianModel",
    "GlobalShift",
    "InfiniteRunLengthError",
    "InsufficientSamplesError",
    "InvalidOrderIndexError",
    "MonitorGrid",
    "MonomialProcess",
    "OrderStatChart",
    "PcaChart",
    "ProcessSpec",
    "ProfileSample",
    "ProfmonError",
    "RunLengthRecord",
    "RunLengthSummary",
    "RunLengthTable",
    "SCORE_DISTRIBUTIONS",
    "SINE_DOMAIN",
    "Scenario",
    "ScenarioReport",
    "SineProcess",
    "SingularCovarianceError",
    "SiteStatistics",
    "StoppingRule",
    "T2Chart",
    "TrajectorySwitch",
    "UNIT_DOMAIN",
    "UnsupportedProcessError",
    "aggregate",
    "arl0_exact",
    "arl0_series",
    "bootstrap_calibrate",
    "calibrate_to_far",
    "calibration_report",
    "conditional_law",
    "config_from_dict",
    "config_to_dict",
    "draw_profile",
    "draw_profiles",
    "emit_report",
    "estimate_moments",
    "first_alarm_pmf",
    "geometric_limit_check",
    "grid_from_dict",
    "grid_to_dict",
    "load_config",
    "load_profiles_csv",
    "monitor_csv",
    "monitor_stream",
    "no_alarm_prob",
    "order_index",
    "order_stat_limit",
    "parse_report",
    "pca_chart_fit",
    "profile_matrix",
    "profile_statistics",
    "run_scenario",
    "runlength_verify",
    "sample",
    "score_profiles",
    "simulate_run_lengths",
    "simulation_study",
    "site_p_values",
    "snr_table",
    "spec_from_dict",
    "spec_to_dict",
    "t2_statistic",
    "t2_statistics",
    "true_model",
    "willemain_sd",
]
