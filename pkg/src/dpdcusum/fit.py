"""Minimum-DPD estimation by multi-start quasi-Newton search.

The averaged per-observation loss is minimized in the family's unconstrained
parameterization with analytic gradients (BFGS); if the line search stalls
short of the gradient tolerance, the best point is polished with a simplex
pass and one more BFGS restart.  The best of all starts by objective value
wins.  Fits are deterministic given (data, alpha, options).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import DataError, FitError
from .series import Series


@dataclass(frozen=True)
class FitOptions:
    max_iter: int = 500
    tol_rel: float = 1e-8
    starts: int = 3
    seed: int = 0


@dataclass(frozen=True)
class FitResult:
    """MDPDE output: the estimate plus convergence diagnostics.

    ``grad_norm`` is measured in the unconstrained parameterization;
    ``converged`` records whether it met ``tol_rel * (1 + |objective|)``.
    """

    theta_hat: object
    objective: float
    grad_norm: float
    iterations: int
    converged: bool
    starts_tried: int


def _grad_norm(grad: np.ndarray) -> float:
    return float(np.linalg.norm(grad))


def fit(model, x, alpha: float, options: FitOptions = FitOptions()) -> FitResult:
    """Minimize the empirical DPD objective of ``model`` over ``x``.

    Raises
    ------
    DataError
        Sample shorter than 10 * dim or degenerate.
    FitError
        Every start failed to produce a finite objective.
    ValueError
        Negative ``alpha``.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    values = x.values if isinstance(x, Series) else np.asarray(x, dtype=float)
    if values.size < model.min_n():
        raise DataError(
            f"need at least {model.min_n()} observations for {model.name}, got {values.size}"
        )
    model.check_data(values)

    def fun(u):
        value, grad = model.objective_u(u, values, alpha)
        if not np.isfinite(value):
            return np.inf, np.zeros_like(u)
        return value, grad

    best = None  # (objective, u, iterations)
    starts = model.starts(values, alpha, options.starts, options.seed)
    for u0 in starts:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = optimize.minimize(
                    fun,
                    u0,
                    jac=True,
                    method="BFGS",
                    options={"gtol": 1e-10, "maxiter": options.max_iter},
                )
        except (FloatingPointError, np.linalg.LinAlgError):
            continue
        if not np.all(np.isfinite(res.x)) or not np.isfinite(res.fun):
            continue
        if best is None or res.fun < best[0]:
            best = (float(res.fun), res.x, int(res.nit))
    if best is None:
        raise FitError(f"optimizer failed on all {len(starts)} starts")

    objective, u_best, iters = best
    value, grad = fun(u_best)
    tol = options.tol_rel * (1.0 + abs(value))
    if _grad_norm(grad) > tol:
        # Line search stalled: simplex polish, then a fresh quasi-Newton pass.
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            nm = optimize.minimize(
                lambda u: fun(u)[0],
                u_best,
                method="Nelder-Mead",
                options={"maxiter": 400 * len(u_best), "xatol": 1e-12, "fatol": 1e-14},
            )
            if np.isfinite(nm.fun) and nm.fun <= objective:
                u_best, objective = nm.x, float(nm.fun)
                iters += int(nm.nit)
            res = optimize.minimize(
                fun,
                u_best,
                jac=True,
                method="BFGS",
                options={"gtol": 1e-10, "maxiter": options.max_iter},
            )
            if np.isfinite(res.fun) and res.fun <= objective:
                u_best, objective = res.x, float(res.fun)
                iters += int(res.nit)
        value, grad = fun(u_best)

    gnorm = _grad_norm(grad)
    return FitResult(
        theta_hat=model.from_u(u_best, values),
        objective=float(value),
        grad_norm=gnorm,
        iterations=iters,
        converged=bool(gnorm <= options.tol_rel * (1.0 + abs(value))),
        starts_tried=len(starts),
    )
