"""One-step-ahead conditional-variance forecasts and RMSE-based alpha choice.

For each time ``t`` in the evaluation window the GARCH model is re-fitted by
MDPDE on the observations after the last change point (positions
``t_c + 1 .. t``), and the next variance is

    sig2[t, t+1] = omega_hat + sum_i arch_i * x[t+1-i]**2
                 + sum_j garch_j * sig2_path[t+1-j]

with the variance path recomputed under the current estimate.  Squared
returns proxy the unobservable variance in the RMSE.  Alpha selection runs
the segmentation once per candidate, forecasts from each candidate's last
change point, and keeps the smallest-RMSE (smallest alpha on ties).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import critical
from .binseg import segment
from .errors import AnalysisError, DataError
from .fit import FitOptions, fit
from .garch import GarchParams, default_init, variance_path
from .models import GarchModel
from .series import Series

MIN_FIT_LENGTH = 100


@dataclass(frozen=True)
class ForecastReport:
    """Rolling forecasts over a window of 1-based positions [start, end]."""

    alpha: float
    t_c: int
    window: tuple[int, int]
    rmse: float
    forecasts: np.ndarray
    errors: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "t_c": self.t_c,
            "window_start": self.window[0],
            "window_end": self.window[1],
            "rmse": self.rmse,
            "forecasts": [None if math.isnan(v) else float(v) for v in self.forecasts],
            "errors": list(self.errors),
        }


def next_variance(theta: GarchParams, x_fit: np.ndarray, init=None) -> float:
    """Variance the recursion assigns to the observation after ``x_fit``."""
    x_fit = np.asarray(x_fit, dtype=float)
    path = variance_path(x_fit, theta, init)
    n = x_fit.size
    s = theta.omega
    for i, a in enumerate(theta.arch, start=1):
        s += a * (x_fit[n - i] ** 2 if n - i >= 0 else path.init_x2)
    for j, b in enumerate(theta.garch, start=1):
        s += b * (path.sigma2[n - j] if n - j >= 0 else path.init_sigma2)
    return float(s)


def one_step_forecasts(
    returns: Series,
    alpha: float,
    t_c: int,
    window: tuple[int, int],
    refit_every: int = 1,
    model: GarchModel | None = None,
    fit_options: FitOptions = FitOptions(),
    min_fit_length: int = MIN_FIT_LENGTH,
) -> ForecastReport:
    """Rolling one-step variance forecasts using data after position ``t_c``.

    Failed re-fits leave NaN forecasts (with a recorded message); the RMSE
    averages over the remaining points.
    """
    start, end = window
    if not 1 <= start <= end:
        raise ValueError(f"bad window {window}")
    if end > returns.n - 1:
        raise DataError(
            f"window end {end} needs a realized return at {end + 1}, series has {returns.n}"
        )
    if t_c < 0 or t_c >= start:
        raise ValueError(f"last change point {t_c} must be in [0, window start)")
    if start - t_c <= min_fit_length:
        raise DataError(
            f"window start {start} leaves only {start - t_c} observations after the "
            f"change point; need more than {min_fit_length}"
        )
    if model is None:
        model = GarchModel(1, 1)
    values = returns.values
    forecasts = np.full(end - start + 1, np.nan)
    errors: list[str] = []
    theta = None
    for pos, t in enumerate(range(start, end + 1)):
        x_fit = values[t_c:t]
        if pos % refit_every == 0 or theta is None:
            try:
                theta = fit(model, x_fit, alpha, fit_options).theta_hat
            except AnalysisError as exc:
                errors.append(f"t={t}: {exc}")
                theta = None
                continue
        forecasts[pos] = next_variance(theta, x_fit, init=default_init(x_fit))
    report = ForecastReport(
        alpha=alpha,
        t_c=t_c,
        window=(start, end),
        rmse=math.nan,
        forecasts=forecasts,
        errors=tuple(errors),
    )
    return ForecastReport(
        alpha=alpha,
        t_c=t_c,
        window=(start, end),
        rmse=rmse(report, returns),
        forecasts=forecasts,
        errors=tuple(errors),
    )


def rmse(report: ForecastReport, realized: Series) -> float:
    """Root mean squared error of forecasts against squared-return proxies."""
    start, end = report.window
    if realized.n < end + 1:
        raise DataError(
            f"realized series of length {realized.n} does not cover window end {end} + 1"
        )
    proxies = realized.values[start : end + 1] ** 2
    ok = np.isfinite(report.forecasts)
    if not np.any(ok):
        raise AnalysisError("no finite forecasts in the window")
    return float(np.sqrt(np.mean((proxies[ok] - report.forecasts[ok]) ** 2)))


def select_alpha(
    returns: Series,
    alphas,
    window: tuple[int, int],
    crit: critical.CritTable,
    level: float = 0.05,
    min_len: int | None = None,
    refit_every: int = 1,
    model: GarchModel | None = None,
    fit_options: FitOptions = FitOptions(),
) -> tuple[float, dict[float, ForecastReport]]:
    """Pick the candidate alpha whose post-change forecasts minimize RMSE.

    Segmentation runs per candidate on the data before the window; the last
    detected change point feeds the rolling forecast.  Ties go to the
    smallest alpha; candidates whose segmentation or forecasting fails are
    skipped (an error is raised only if every candidate fails).
    """
    if model is None:
        model = GarchModel(1, 1)
    estimation = returns.slice(0, window[0] - 1)
    reports: dict[float, ForecastReport] = {}
    best: float | None = None
    for alpha in sorted(set(float(a) for a in alphas)):
        try:
            seg = segment(
                model, estimation, alpha, crit, level=level, min_len=min_len, fit_options=fit_options
            )
            t_c = seg.change_points[-1] if seg.change_points else 0
            report = one_step_forecasts(
                returns, alpha, t_c, window, refit_every=refit_every, model=model,
                fit_options=fit_options,
            )
        except AnalysisError:
            continue
        reports[alpha] = report
        if best is None or report.rmse < reports[best].rmse:
            best = alpha
    if best is None:
        raise AnalysisError("all candidate alphas failed")
    return best, reports
