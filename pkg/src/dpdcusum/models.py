"""Parametric families wired for constrained fitting and score-CUSUM testing.

Each family maps its natural parameters to an unconstrained vector ``u`` via
a smooth bijection so a quasi-Newton optimizer can run without bounds:

* normal:  theta = (mu, sigma2) with sigma2 = floor + exp(u1); the floor is
  a small data-relative constant keeping the scale away from zero.
* garch:   omega = exp(u0), arch_i = exp(u_i), and the garch block mapped
  through a softmax-style transform onto the open simplex scaled by
  (1 - BETA_GAP), so the coefficient sum stays strictly below one.

Families expose the averaged per-observation loss (value and gradient in
``u``), per-observation score rows in the natural parameterization, and the
multi-start initial points used by the fitter.
"""

from __future__ import annotations

import numpy as np

from . import garch as g
from . import normal as nd
from .errors import DataError
from .rng import derived_stream
from .series import Series

_LOG_CLIP = 60.0  # exp stays finite and far from overflow


def _as_values(x) -> np.ndarray:
    return x.values if isinstance(x, Series) else np.asarray(x, dtype=float)


class NormalModel:
    """i.i.d. N(mu, sigma2) family; dimension 2."""

    name = "normal"
    dim = 2
    param_names = ("mu", "sigma2")

    def min_n(self) -> int:
        return 10 * self.dim

    def check_data(self, x) -> np.ndarray:
        x = _as_values(x)
        if np.var(x) <= 0:
            raise DataError("degenerate sample: zero variance")
        return x

    def from_u(self, u: np.ndarray, x) -> nd.NormalParams:
        x = _as_values(x)
        floor = nd.sigma2_floor_for(x)
        u = np.clip(np.asarray(u, dtype=float), -_LOG_CLIP, _LOG_CLIP)
        return nd.NormalParams(float(u[0]), floor + float(np.exp(u[1])), sigma2_floor=floor)

    def to_u(self, params: nd.NormalParams, x) -> np.ndarray:
        x = _as_values(x)
        floor = nd.sigma2_floor_for(x)
        gap = max(params.sigma2 - floor, 1e-300)
        return np.array([params.mu, np.log(gap)])

    def objective_u(self, u: np.ndarray, x, alpha: float) -> tuple[float, np.ndarray]:
        x = _as_values(x)
        params = self.from_u(u, x)
        value = float(np.mean(nd.loss(x, params, alpha)))
        grad_theta = np.mean(nd.loss_grad(x, params, alpha), axis=0)
        jac = np.array([1.0, params.sigma2 - params.sigma2_floor])
        return value, grad_theta * jac

    def contributions(self, x, params: nd.NormalParams, alpha: float) -> np.ndarray:
        return nd.loss_grad(_as_values(x), params, alpha)

    def starts(self, x, alpha: float, n_starts: int, seed: int) -> list[np.ndarray]:
        x = self.check_data(x)
        mean, var = float(np.mean(x)), float(np.var(x))
        sd = np.sqrt(var)
        med = float(np.median(x))
        mad2 = (1.4826 * float(np.median(np.abs(x - med)))) ** 2
        points = [
            nd.NormalParams(mean, var, sigma2_floor=nd.sigma2_floor_for(x)),
            nd.NormalParams(mean + 0.2 * sd, 0.8 * var, sigma2_floor=nd.sigma2_floor_for(x)),
            nd.NormalParams(med, mad2 if mad2 > 0 else var, sigma2_floor=nd.sigma2_floor_for(x)),
        ]
        for i in range(3, n_starts):
            rng = derived_stream(seed, i)
            points.append(
                nd.NormalParams(
                    mean + sd * rng.standard_normal(),
                    var * np.exp(rng.uniform(-1.0, 1.0)),
                    sigma2_floor=nd.sigma2_floor_for(x),
                )
            )
        return [self.to_u(p, x) for p in points[:n_starts]]

    def describe(self, params: nd.NormalParams) -> dict:
        return {"mu": params.mu, "sigma2": params.sigma2}


class GarchModel:
    """GARCH(p, q) family; dimension 1 + p + q."""

    name = "garch"

    def __init__(self, p: int = 1, q: int = 1) -> None:
        if p < 0 or q < 0 or p + q == 0:
            raise ValueError(f"need p >= 0, q >= 0 and p + q >= 1, got p={p}, q={q}")
        self.p = p
        self.q = q
        self.dim = 1 + p + q
        self.param_names = (
            "omega",
            *(f"arch{i + 1}" for i in range(p)),
            *(f"garch{j + 1}" for j in range(q)),
        )

    def min_n(self) -> int:
        return 10 * self.dim

    def check_data(self, x) -> np.ndarray:
        x = _as_values(x)
        if np.mean(x * x) <= 0:
            raise DataError("degenerate sample: all observations zero")
        return x

    def _beta_from_v(self, v: np.ndarray) -> np.ndarray:
        if self.q == 0:
            return np.empty(0)
        m = max(0.0, float(np.max(v)))
        e = np.exp(v - m)
        denom = np.exp(-m) + float(np.sum(e))
        return (1.0 - g.BETA_GAP) * e / denom

    def from_u(self, u: np.ndarray, x=None) -> g.GarchParams:
        u = np.clip(np.asarray(u, dtype=float), -_LOG_CLIP, _LOG_CLIP)
        omega = float(np.exp(u[0]))
        arch = np.exp(u[1 : 1 + self.p])
        beta = self._beta_from_v(u[1 + self.p :])
        return g.GarchParams(omega, tuple(arch), tuple(beta))

    def to_u(self, params: g.GarchParams, x=None) -> np.ndarray:
        tiny = 1e-300
        u = [np.log(max(params.omega, tiny))]
        u += [np.log(max(a, tiny)) for a in params.arch]
        if self.q:
            b = np.clip(np.array(params.garch) / (1.0 - g.BETA_GAP), tiny, None)
            s = float(np.sum(b))
            if s >= 1.0:
                b *= (1.0 - 1e-9) / s
                s = 1.0 - 1e-9
            u += list(np.log(b / (1.0 - s)))
        return np.array(u)

    def objective_u(self, u: np.ndarray, x, alpha: float) -> tuple[float, np.ndarray]:
        x = _as_values(x)
        params = self.from_u(u)
        path = g.variance_path(x, params)
        value = float(np.mean(g.loss_tilde(x, path.sigma2, alpha)))
        dl = g.dloss_dsigma2(x, path.sigma2, alpha)
        grad_theta = (dl[:, None] * path.grad).mean(axis=0)
        return value, self._chain_to_u(grad_theta, params)

    def _chain_to_u(self, grad_theta: np.ndarray, params: g.GarchParams) -> np.ndarray:
        out = np.empty(self.dim)
        out[0] = grad_theta[0] * params.omega
        out[1 : 1 + self.p] = grad_theta[1 : 1 + self.p] * np.array(params.arch)
        if self.q:
            b = np.array(params.garch) / (1.0 - g.BETA_GAP)
            gb = grad_theta[1 + self.p :] * (1.0 - g.BETA_GAP)
            out[1 + self.p :] = b * (gb - float(np.dot(b, gb)))
        return out

    def contributions(self, x, params: g.GarchParams, alpha: float) -> np.ndarray:
        x = _as_values(x)
        path = g.variance_path(x, params)
        return g.dloss_dsigma2(x, path.sigma2, alpha)[:, None] * path.grad

    def starts(self, x, alpha: float, n_starts: int, seed: int) -> list[np.ndarray]:
        x = self.check_data(x)
        var = float(np.var(x))
        p, q = self.p, self.q

        def point(omega, a_total, b_total):
            return g.GarchParams(
                omega,
                tuple([a_total / p] * p) if p else (),
                tuple([b_total / q] * q) if q else (),
            )

        base = point(0.1 * var, 0.1 if p else 0.0, 0.8 if q else 0.0)
        factors = np.where(np.arange(self.dim) % 2 == 0, 1.2, 0.8)
        perturbed = g.GarchParams(
            base.omega * factors[0],
            tuple(np.array(base.arch) * factors[1 : 1 + p]),
            tuple(np.array(base.garch) * factors[1 + p :]),
        )
        conservative = point(0.55 * var, 0.15 if p else 0.0, 0.3 if q else 0.0)
        points = [base, perturbed, conservative]
        for i in range(3, n_starts):
            rng = derived_stream(seed, i)
            mult = np.exp(0.3 * rng.standard_normal(self.dim))
            beta = np.array(base.garch) * mult[1 + p :]
            s = float(np.sum(beta))
            if s > 1.0 - 2 * g.BETA_GAP:
                beta *= (1.0 - 2 * g.BETA_GAP) / s
            points.append(
                g.GarchParams(
                    base.omega * mult[0],
                    tuple(np.array(base.arch) * mult[1 : 1 + p]),
                    tuple(beta),
                )
            )
        return [self.to_u(pt) for pt in points[:n_starts]]

    def describe(self, params: g.GarchParams) -> dict:
        out = {"omega": params.omega}
        out.update({f"arch{i + 1}": a for i, a in enumerate(params.arch)})
        out.update({f"garch{j + 1}": b for j, b in enumerate(params.garch)})
        return out


def make_model(name: str, p: int = 1, q: int = 1):
    if name == "normal":
        return NormalModel()
    if name == "garch":
        return GarchModel(p, q)
    raise ValueError(f"unknown model {name!r} (expected 'normal' or 'garch')")
