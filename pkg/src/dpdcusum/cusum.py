"""Score-CUSUM tests for parameter constancy, built on DPD score rows.

For per-observation loss gradients ``l_i = d loss(x_i; theta_hat) / d theta``
(rows of the contribution matrix), the test process is the centered partial
sum ``C_k = S_k - (k/n) S_n`` and the statistic is

    max_k (1/n) C_k' Khat^{-1} C_k,    Khat = (1/n) sum_i l_i l_i'.

At an exact stationary point this equals the literal scaled-gradient form
``max_k (k^2/n) dH_k' Khat^{-1} dH_k``; the centered form is additionally
immune to the O(tol) residual gradient of a numerical fit.  Under the null
the statistic converges to the sup of the squared norm of a ``dim``-dim
Brownian bridge, whose Monte Carlo quantiles come from a ``CritTable``.

The residual-based CUSUM comparison test for GARCH data is also provided; it
uses centered sums of squared residuals and the scalar sup-|bridge| law.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import critical
from . import garch as g
from .errors import DegenerateStatisticError, SingularMatrixError
from .fit import FitOptions, FitResult, fit
from .series import Series

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class CusumProcess:
    """Centered score partial sums (rows) and their quadratic-form path."""

    centered_sums: np.ndarray
    quadratic: np.ndarray


@dataclass(frozen=True)
class TestOutcome:
    """A single change test: statistic, reference quantile, and location.

    ``change_point`` is the 1-based index after which the split would occur
    (the argmax of the quadratic path, smallest index on ties).
    """

    statistic: float
    dim: int
    critical_value: float
    p_value: float
    change_point: int
    alpha: float
    process: CusumProcess
    level: float
    n: int
    fit: FitResult | None = None
    method: str = "dpd"

    @property
    def rejected(self) -> bool:
        return self.statistic > self.critical_value

    def to_dict(self, include_process: bool = True) -> dict:
        out = {
            "method": self.method,
            "statistic": self.statistic,
            "dim": self.dim,
            "alpha": self.alpha,
            "level": self.level,
            "critical_value": self.critical_value,
            "p_value": self.p_value,
            "rejected": self.rejected,
            "change_point": self.change_point,
            "n": self.n,
        }
        if self.fit is not None:
            out["converged"] = self.fit.converged
            out["objective"] = self.fit.objective
        if include_process:
            out["quadratic_process"] = [float(v) for v in self.process.quadratic]
        return out


def score_contributions(model, x, theta_hat, alpha: float) -> np.ndarray:
    """Per-observation loss gradient rows at the fitted parameters (n x dim)."""
    return model.contributions(x, theta_hat, alpha)


def k_hat_matrix(contributions: np.ndarray) -> np.ndarray:
    """Outer-product moment estimate (1/n) sum_i row_i row_i'."""
    c = np.asarray(contributions, dtype=float)
    k = c.T @ c / c.shape[0]
    return 0.5 * (k + k.T)


def _solve_normalized(k_hat: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Solve K z = row for every row, adding one round of jitter if needed."""
    d = k_hat.shape[0]
    cond = np.linalg.cond(k_hat)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        jitter = 1e-10 * np.trace(k_hat) / d
        warnings.warn(
            f"ill-conditioned score covariance (cond={cond:.2e}); adding jitter {jitter:.2e}",
            RuntimeWarning,
            stacklevel=3,
        )
        k_hat = k_hat + jitter * np.eye(d)
        cond = np.linalg.cond(k_hat)
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            raise SingularMatrixError(
                f"score covariance is singular beyond repair (cond={cond:.2e})"
            )
    try:
        cho = linalg.cho_factor(k_hat)
        return linalg.cho_solve(cho, rows.T).T
    except linalg.LinAlgError as exc:
        raise SingularMatrixError(f"score covariance not positive definite: {exc}") from exc


def cusum_process(contributions: np.ndarray, k_hat: np.ndarray | None = None) -> CusumProcess:
    """Centered partial sums and quadratic path of the score rows."""
    c = np.asarray(contributions, dtype=float)
    n = c.shape[0]
    partial = np.cumsum(c, axis=0)
    centered = partial - np.outer(np.arange(1, n + 1) / n, partial[-1])
    if k_hat is None:
        k_hat = k_hat_matrix(c)
    solved = _solve_normalized(k_hat, centered)
    quadratic = np.einsum("ij,ij->i", centered, solved) / n
    return CusumProcess(centered_sums=centered, quadratic=quadratic)


def two_sample_mean_statistic(contributions: np.ndarray, k_hat: np.ndarray | None = None) -> np.ndarray:
    """Quadratic path computed through the split-mean contrast form.

    For each k the process value is the quadratic form of
    ``(k/n)(1 - k/n) sqrt(n) (mean of rows 1..k - mean of rows k+1..n)``;
    algebraically identical to :func:`cusum_process` but computed along an
    independent route (used to cross-check the identity).
    """
    c = np.asarray(contributions, dtype=float)
    n = c.shape[0]
    if k_hat is None:
        k_hat = k_hat_matrix(c)
    partial = np.cumsum(c, axis=0)
    total = partial[-1]
    out = np.zeros(n)
    for k in range(1, n):
        mean_left = partial[k - 1] / k
        mean_right = (total - partial[k - 1]) / (n - k)
        v = (k / n) * (1.0 - k / n) * np.sqrt(n) * (mean_left - mean_right)
        z = _solve_normalized(k_hat, v[None, :])[0]
        out[k - 1] = float(v @ z)
    return out


def j1_matrix(contributions: np.ndarray, alpha: float, printed_exponent: bool = True) -> np.ndarray:
    """Diagnostic normalization matrix Khat / k(alpha) for GARCH output.

    The test statistic does not depend on the k(alpha) variant (the constant
    cancels against the matching factor in the statistic); this matrix is
    reported for comparison with the estimator's asymptotic covariance only.
    """
    return k_hat_matrix(contributions) / g.k_alpha(alpha, printed_exponent=printed_exponent)


def compute_statistic(
    model,
    x,
    alpha: float,
    fit_options: FitOptions = FitOptions(),
    fit_result: FitResult | None = None,
) -> tuple[float, int, CusumProcess, FitResult]:
    """Fit (unless given) and evaluate the statistic, argmax and path."""
    if fit_result is None:
        fit_result = fit(model, x, alpha, fit_options)
    rows = score_contributions(model, x, fit_result.theta_hat, alpha)
    process = cusum_process(rows)
    k_idx = int(np.argmax(process.quadratic))
    return float(process.quadratic[k_idx]), k_idx + 1, process, fit_result


def dpd_test(
    model,
    x,
    alpha: float,
    crit: critical.CritTable,
    level: float = 0.05,
    fit_options: FitOptions = FitOptions(),
    fit_result: FitResult | None = None,
) -> TestOutcome:
    """Run the DPD score-CUSUM parameter-change test.

    ``crit`` must be a ``sup_norm_sq`` table of the model's dimension.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    if crit.statistic != critical.SUP_NORM_SQ or crit.dim != model.dim:
        raise ValueError(
            f"critical table mismatch: need {critical.SUP_NORM_SQ} dim={model.dim}, "
            f"got {crit.statistic} dim={crit.dim}"
        )
    stat, change_point, process, fit_result = compute_statistic(
        model, x, alpha, fit_options, fit_result
    )
    n = x.n if isinstance(x, Series) else len(x)
    return TestOutcome(
        statistic=stat,
        dim=model.dim,
        critical_value=critical.quantile(crit, 1.0 - level),
        p_value=critical.p_value(crit, stat),
        change_point=change_point,
        alpha=alpha,
        process=process,
        level=level,
        n=n,
        fit=fit_result,
    )


def residual_cusum_test(
    x,
    theta_hat: g.GarchParams,
    crit: critical.CritTable,
    level: float = 0.05,
) -> TestOutcome:
    """Residual-based CUSUM test on squared GARCH residuals.

    The statistic is ``max_k |sum_{t<=k} e_t^2 - (k/n) sum_t e_t^2| /
    (sqrt(n) tau)`` with ``tau^2`` the variance of the squared residuals;
    its null law is the sup of |B(s)| for a scalar Brownian bridge, so
    ``crit`` must be a ``sup_abs`` table.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    if crit.statistic != critical.SUP_ABS or crit.dim != 1:
        raise ValueError(
            f"critical table mismatch: need {critical.SUP_ABS} dim=1, "
            f"got {crit.statistic} dim={crit.dim}"
        )
    eps2 = g.residuals(x, theta_hat).values ** 2
    n = eps2.size
    tau2 = float(np.mean(eps2**2) - np.mean(eps2) ** 2)
    if tau2 <= 0:
        raise DegenerateStatisticError("zero variance of squared residuals")
    partial = np.cumsum(eps2)
    centered = partial - np.arange(1, n + 1) / n * partial[-1]
    path = np.abs(centered) / (np.sqrt(n) * np.sqrt(tau2))
    k_idx = int(np.argmax(path))
    stat = float(path[k_idx])
    return TestOutcome(
        statistic=stat,
        dim=1,
        critical_value=critical.quantile(crit, 1.0 - level),
        p_value=critical.p_value(crit, stat),
        change_point=k_idx + 1,
        alpha=0.0,
        process=CusumProcess(centered_sums=centered[:, None], quadratic=path),
        level=level,
        n=n,
        fit=None,
        method="residual",
    )
