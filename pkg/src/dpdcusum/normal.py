"""Density-power-divergence loss for the i.i.d. normal family N(mu, sigma2).

The per-observation loss at downweighting exponent ``alpha`` is

    alpha > 0:  C(sigma2, alpha) - (1 + 1/alpha) * f(x)**alpha
    alpha = 0:  -log f(x)

where ``f`` is the N(mu, sigma2) density and ``C`` its (1+alpha)-power
integral, which for the normal family is ``(2 pi sigma2)**(-alpha/2) /
sqrt(1+alpha)``.  All derivatives here are analytic, taken with respect to
theta = (mu, sigma2), and vectorize over ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_2PI = np.log(2.0 * np.pi)

# Relative floor applied to sigma2 (times the sample variance of the fitted
# series) so the parameter space stays away from the scale-zero boundary.
SIGMA2_FLOOR_REL = 1e-6
SIGMA2_FLOOR_ABS = 1e-12


@dataclass(frozen=True)
class NormalParams:
    """Location/variance parameter point, with a positive variance floor."""

    mu: float
    sigma2: float
    sigma2_floor: float = SIGMA2_FLOOR_ABS

    def __post_init__(self) -> None:
        if not self.sigma2_floor > 0:
            raise ValueError(f"sigma2_floor must be positive, got {self.sigma2_floor}")
        if not self.sigma2 >= self.sigma2_floor:
            raise ValueError(
                f"sigma2={self.sigma2} below the floor {self.sigma2_floor}"
            )

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.sigma2])


def sigma2_floor_for(x: np.ndarray) -> float:
    """Data-relative variance floor: 1e-6 times the sample variance."""
    return max(SIGMA2_FLOOR_REL * float(np.var(x)), SIGMA2_FLOOR_ABS)


def integral_term(theta: NormalParams, alpha: float) -> float:
    """Integral of the (1+alpha)-th density power: (2 pi s2)^(-a/2)/sqrt(1+a)."""
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if alpha == 0:
        return 1.0
    return float((2.0 * np.pi * theta.sigma2) ** (-alpha / 2.0) / np.sqrt(1.0 + alpha))


def _density_power(x: np.ndarray, theta: NormalParams, alpha: float) -> np.ndarray:
    """f_theta(x)**alpha, evaluated stably in log space."""
    z2 = (x - theta.mu) ** 2 / theta.sigma2
    log_f = -0.5 * (LOG_2PI + np.log(theta.sigma2) + z2)
    return np.exp(alpha * log_f)


def loss(x, theta: NormalParams, alpha: float):
    """Per-observation DPD loss; scalar in, scalar out (or vectorized).

    For alpha > 0 the observation enters only through ``f(x)**alpha``, so the
    loss is bounded in ``x``; alpha = 0 recovers the negative log-density.
    """
    x = np.asarray(x, dtype=float)
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if alpha == 0:
        z2 = (x - theta.mu) ** 2 / theta.sigma2
        out = 0.5 * (LOG_2PI + np.log(theta.sigma2) + z2)
    else:
        out = integral_term(theta, alpha) - (1.0 + 1.0 / alpha) * _density_power(x, theta, alpha)
    return out if out.ndim else float(out)


def loss_grad(x, theta: NormalParams, alpha: float) -> np.ndarray:
    """Gradient of :func:`loss` in (mu, sigma2).

    Returns shape (2,) for scalar ``x`` and (n, 2) for a vector.  At alpha = 0
    this is the negative score of the normal log-density.
    """
    x = np.asarray(x, dtype=float)
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    d = x - theta.mu
    s2 = theta.sigma2
    if alpha == 0:
        g_mu = -d / s2
        g_s2 = -(d * d - s2) / (2.0 * s2 * s2)
    else:
        fa = _density_power(x, theta, alpha)
        g_mu = -(1.0 + alpha) * fa * d / s2
        g_s2 = (
            -(alpha / 2.0) * integral_term(theta, alpha) / s2
            - (1.0 + alpha) * fa * (d * d - s2) / (2.0 * s2 * s2)
        )
    out = np.stack([np.broadcast_to(g_mu, x.shape), np.broadcast_to(g_s2, x.shape)], axis=-1)
    return out[0] if x.ndim == 0 else out


def loss_hess(x: float, theta: NormalParams, alpha: float) -> np.ndarray:
    """Hessian of :func:`loss` in (mu, sigma2); symmetric 2x2."""
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    d = float(x) - theta.mu
    s2 = theta.sigma2
    if alpha == 0:
        h_mm = 1.0 / s2
        h_ms = d / s2**2
        h_ss = -0.5 / s2**2 + d * d / s2**3
    else:
        fa = float(_density_power(np.asarray(float(x)), theta, alpha))
        itg = integral_term(theta, alpha)
        h_mm = (1.0 + alpha) * fa / s2 * (1.0 - alpha * d * d / s2)
        h_ms = -(1.0 + alpha) * fa * d / s2**2 * (alpha * (d * d - s2) / (2.0 * s2) - 1.0)
        h_ss = (alpha / 2.0) * (1.0 + alpha / 2.0) * itg / s2**2 - (1.0 + alpha) * fa * (
            alpha * (d * d - s2) ** 2 / (4.0 * s2**4) + (s2 - 2.0 * d * d) / (2.0 * s2**3)
        )
    return np.array([[h_mm, h_ms], [h_ms, h_ss]])
