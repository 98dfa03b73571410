"""Robust parameter-change detection for univariate data.

Score-CUSUM tests built from density-power-divergence estimating equations,
for i.i.d. normal and GARCH(p, q) models, with Monte Carlo critical values,
binary segmentation, contamination simulators, and forecast-based selection
of the robustness exponent.
"""

from .binseg import SegmentationResult, segment
from .critical import CritTable, get_table, p_value, quantile, simulate_sup_bb_abs, simulate_sup_bb_sq
from .cusum import (
    CusumProcess,
    TestOutcome,
    dpd_test,
    k_hat_matrix,
    residual_cusum_test,
    score_contributions,
)
from .errors import AnalysisError, DataError, DegenerateStatisticError, FitError, SingularMatrixError
from .fit import FitOptions, FitResult, fit
from .forecast import ForecastReport, one_step_forecasts, rmse, select_alpha
from .garch import GarchParams, VariancePath, g_alpha, k_alpha, residuals, variance_path
from .models import GarchModel, NormalModel, make_model
from .normal import NormalParams
from .series import Series, load_series, log_returns
from .simulate import (
    Contamination,
    ExperimentResult,
    ScenarioSpec,
    gen_garch,
    gen_iid_contaminated,
    generate_replication,
    size_power_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisError",
    "Contamination",
    "CritTable",
    "CusumProcess",
    "DataError",
    "DegenerateStatisticError",
    "ExperimentResult",
    "FitError",
    "FitOptions",
    "FitResult",
    "ForecastReport",
    "GarchModel",
    "GarchParams",
    "NormalModel",
    "NormalParams",
    "ScenarioSpec",
    "SegmentationResult",
    "Series",
    "SingularMatrixError",
    "TestOutcome",
    "VariancePath",
    "dpd_test",
    "fit",
    "g_alpha",
    "gen_garch",
    "gen_iid_contaminated",
    "generate_replication",
    "get_table",
    "k_alpha",
    "k_hat_matrix",
    "load_series",
    "log_returns",
    "make_model",
    "one_step_forecasts",
    "p_value",
    "quantile",
    "residual_cusum_test",
    "residuals",
    "rmse",
    "score_contributions",
    "segment",
    "select_alpha",
    "simulate_sup_bb_abs",
    "simulate_sup_bb_sq",
    "size_power_experiment",
    "variance_path",
]
