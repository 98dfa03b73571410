"""Contaminated data generators and the size/power experiment harness.

Generators follow the outlier schemes used throughout the study:

* iid:  X = X_o + delta * I * sign(X_o), X_o ~ N(mu, sigma2), I ~ Bern(p);
* io:   GARCH innovations replaced by eps + |Z| * I * sign(eps),
        Z ~ N(0, sigma_c2), so outliers propagate through the variance
        recursion;
* ao:   |Z| * I * sign(X_o) added to the observed GARCH path only.

Scenario parameters switch at ceil(change_at * n); ``change_at = 1`` means
no change.  GARCH paths discard a 500-observation burn-in.  Experiments draw
replication ``i`` from substream ``i`` of the scenario seed, making result
tables identical for any worker count.

Scenario files are flat ``key = value`` text; see ``ScenarioSpec.from_text``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from . import critical
from .cusum import compute_statistic
from .errors import AnalysisError, DataError
from .fit import FitOptions
from .garch import GarchParams
from .models import GarchModel, NormalModel, make_model
from .normal import NormalParams
from .rng import substream
from .series import Series

BURN_IN = 500
_BLOCK = 32


@dataclass(frozen=True)
class Contamination:
    """Outlier scheme: kind in {none, iid, io, ao} with its parameters."""

    kind: str = "none"
    p: float = 0.0
    delta: float = 0.0
    sigma_c2: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("none", "iid", "io", "ao"):
            raise ValueError(f"unknown contamination kind {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"contamination probability must be in [0, 1], got {self.p}")
        if self.delta < 0 or self.sigma_c2 < 0:
            raise ValueError("delta and sigma_c2 must be >= 0")


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulation design: model, sample size, change, contamination."""

    name: str
    model: NormalModel | GarchModel
    n: int
    theta_before: NormalParams | GarchParams
    theta_after: NormalParams | GarchParams
    change_at: float = 0.5
    contamination: Contamination = Contamination()
    replications: int = 2000
    level: float = 0.05
    alphas: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.5)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 < self.change_at <= 1.0:
            raise ValueError(f"change_at must be in (0, 1], got {self.change_at}")
        if not 0.0 < self.level < 1.0:
            raise ValueError(f"level must be in (0, 1), got {self.level}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if any(a < 0 for a in self.alphas):
            raise ValueError("alphas must be >= 0")

    @property
    def change_index(self) -> int:
        """Last observation index generated under theta_before (1-based)."""
        return min(int(math.ceil(self.change_at * self.n)), self.n)

    @classmethod
    def from_text(cls, text: str, name: str = "scenario") -> "ScenarioSpec":
        keys: dict[str, str] = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"bad scenario line (need key = value): {raw!r}")
            key, _, val = line.partition("=")
            keys[key.strip()] = val.strip()

        def floats(key: str) -> tuple[float, ...]:
            return tuple(float(v) for v in keys[key].replace(",", " ").split())

        model_name = keys.get("model", "normal")
        p = int(keys.get("p", "1"))
        q = int(keys.get("q", "1"))
        model = make_model(model_name, p, q)

        def theta(key: str):
            vals = floats(key)
            if model_name == "normal":
                if len(vals) != 2:
                    raise DataError(f"{key} needs (mu, sigma2), got {vals}")
                return NormalParams(vals[0], vals[1])
            if len(vals) != 1 + p + q:
                raise DataError(f"{key} needs (omega, {p} arch, {q} garch), got {vals}")
            return GarchParams(vals[0], vals[1 : 1 + p], vals[1 + p :])

        theta_before = theta("theta_before")
        theta_after = theta("theta_after") if "theta_after" in keys else theta_before
        contamination = Contamination(
            kind=keys.get("contamination", "none"),
            p=float(keys.get("contamination_p", "0")),
            delta=float(keys.get("delta", "0")),
            sigma_c2=float(keys.get("sigma_c2", "0")),
        )
        return cls(
            name=keys.get("name", name),
            model=model,
            n=int(keys["n"]),
            theta_before=theta_before,
            theta_after=theta_after,
            change_at=float(keys.get("change_at", "1.0")),
            contamination=contamination,
            replications=int(keys.get("replications", "2000")),
            level=float(keys.get("level", "0.05")),
            alphas=floats("alphas") if "alphas" in keys else (0.0, 0.1, 0.2, 0.3, 0.5),
            seed=int(keys.get("seed", "0")),
        )

    @classmethod
    def from_file(cls, path: str) -> "ScenarioSpec":
        if not os.path.exists(path):
            raise DataError(f"scenario file not found: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read(), name=os.path.splitext(os.path.basename(path))[0])


def gen_iid_contaminated(spec: ScenarioSpec, rng: np.random.Generator) -> Series:
    """Normal sample with a parameter switch and iid additive outliers."""
    if not isinstance(spec.theta_before, NormalParams):
        raise ValueError("gen_iid_contaminated needs normal-family parameters")
    n, k0 = spec.n, spec.change_index
    z = rng.standard_normal(n)
    mu = np.where(np.arange(1, n + 1) <= k0, spec.theta_before.mu, spec.theta_after.mu)
    sd = np.where(
        np.arange(1, n + 1) <= k0,
        math.sqrt(spec.theta_before.sigma2),
        math.sqrt(spec.theta_after.sigma2),
    )
    x = mu + sd * z
    c = spec.contamination
    if c.kind == "iid":
        hit = rng.random(n) < c.p
        x = np.where(hit, x + c.delta * np.sign(x), x)
    elif c.kind != "none":
        raise ValueError(f"contamination {c.kind!r} not defined for the normal family")
    return Series(x, label=spec.name)


@njit(cache=True)
def _garch_sim(eps, omega_a, arch_a, garch_a, omega_b, arch_b, garch_b, switch_after, init_var):  # pragma: no cover
    total = eps.shape[0]
    p = arch_a.shape[0]
    q = garch_a.shape[0]
    x = np.empty(total)
    sig2 = np.empty(total)
    for t in range(total):
        if t < switch_after:
            w, ar, ga = omega_a, arch_a, garch_a
        else:
            w, ar, ga = omega_b, arch_b, garch_b
        s = w
        for i in range(p):
            lag = t - 1 - i
            s += ar[i] * (x[lag] * x[lag] if lag >= 0 else init_var)
        for j in range(q):
            lag = t - 1 - j
            s += ga[j] * (sig2[lag] if lag >= 0 else init_var)
        sig2[t] = s
        x[t] = np.sqrt(s) * eps[t]
    return x


def gen_garch(spec: ScenarioSpec, rng: np.random.Generator) -> Series:
    """GARCH sample with a parameter switch and optional IO/AO outliers."""
    if not isinstance(spec.theta_before, GarchParams):
        raise ValueError("gen_garch needs GARCH parameters")
    tb, ta = spec.theta_before, spec.theta_after
    c = spec.contamination
    total = BURN_IN + spec.n
    eps = rng.standard_normal(total)
    if c.kind == "io":
        hit = rng.random(total) < c.p
        z = math.sqrt(c.sigma_c2) * rng.standard_normal(total)
        eps = np.where(hit, eps + np.abs(z) * np.sign(eps), eps)
    persist = sum(tb.arch) + sum(tb.garch)
    init_var = tb.omega / (1.0 - persist) if persist < 1.0 else tb.omega
    x = _garch_sim(
        eps,
        tb.omega,
        np.array(tb.arch),
        np.array(tb.garch),
        ta.omega,
        np.array(ta.arch),
        np.array(ta.garch),
        BURN_IN + spec.change_index,
        init_var,
    )[BURN_IN:]
    if c.kind == "ao":
        hit = rng.random(spec.n) < c.p
        z = math.sqrt(c.sigma_c2) * rng.standard_normal(spec.n)
        x = np.where(hit, x + np.abs(z) * np.sign(x), x)
    elif c.kind == "iid":
        raise ValueError("iid contamination is not defined for the GARCH family")
    return Series(x, label=spec.name)


def generate(spec: ScenarioSpec, rng: np.random.Generator) -> Series:
    if isinstance(spec.model, NormalModel):
        return gen_iid_contaminated(spec, rng)
    return gen_garch(spec, rng)


def generate_replication(spec: ScenarioSpec, index: int) -> Series:
    """Data for replication ``index``, independent of any other replication."""
    return generate(spec, substream(spec.seed, index))


# -- size/power harness ------------------------------------------------------


@dataclass(frozen=True)
class ExperimentRow:
    scenario: str
    n: int
    alpha: float
    rejections: int
    reps: int
    rate: float
    mc_se: float
    failures: int = 0


@dataclass(frozen=True)
class ExperimentResult:
    rows: tuple[ExperimentRow, ...]

    def to_text(self, delimiter: str = ",") -> str:
        lines = [delimiter.join(["scenario", "n", "alpha", "rejections", "reps", "rate", "mc_se"])]
        for r in self.rows:
            lines.append(
                delimiter.join(
                    [
                        r.scenario,
                        str(r.n),
                        format(r.alpha, "g"),
                        str(r.rejections),
                        str(r.reps),
                        format(r.rate, ".6f"),
                        format(r.mc_se, ".6f"),
                    ]
                )
            )
        for r in self.rows:
            if r.failures:
                lines.append(f"# failures alpha={r.alpha:g}: {r.failures}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "scenario": r.scenario,
                    "n": r.n,
                    "alpha": r.alpha,
                    "rejections": r.rejections,
                    "reps": r.reps,
                    "rate": r.rate,
                    "mc_se": r.mc_se,
                    "failures": r.failures,
                }
                for r in self.rows
            ]
        }


def _experiment_block(
    spec: ScenarioSpec,
    threshold: float,
    fit_options: FitOptions,
    lo: int,
    hi: int,
) -> np.ndarray:
    out = np.zeros((hi - lo, len(spec.alphas)), dtype=np.int8)
    for r in range(lo, hi):
        data = generate_replication(spec, r)
        for a_idx, alpha in enumerate(spec.alphas):
            try:
                stat, _, _, _ = compute_statistic(spec.model, data, alpha, fit_options)
                out[r - lo, a_idx] = 1 if stat > threshold else 0
            except AnalysisError:
                out[r - lo, a_idx] = -1
    return out


def size_power_experiment(
    spec: ScenarioSpec,
    crit: critical.CritTable,
    threads: int = 1,
    fit_options: FitOptions = FitOptions(),
) -> ExperimentResult:
    """Rejection frequency of the DPD test for each alpha in the scenario.

    Replication failures are tolerated up to 1% of the run count per alpha
    (reported and excluded from the denominator); beyond that the experiment
    errors out.
    """
    if crit.statistic != critical.SUP_NORM_SQ or crit.dim != spec.model.dim:
        raise ValueError(
            f"critical table mismatch: need {critical.SUP_NORM_SQ} dim={spec.model.dim}"
        )
    threshold = critical.quantile(crit, 1.0 - spec.level)
    reps = spec.replications
    flags = np.zeros((reps, len(spec.alphas)), dtype=np.int8)
    blocks = [(lo, min(lo + _BLOCK, reps)) for lo in range(0, reps, _BLOCK)]
    if threads > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [
                (lo, pool.submit(_experiment_block, spec, threshold, fit_options, lo, hi))
                for lo, hi in blocks
            ]
            for lo, fut in futures:
                chunk = fut.result()
                flags[lo : lo + chunk.shape[0]] = chunk
    else:
        for lo, hi in blocks:
            flags[lo:hi] = _experiment_block(spec, threshold, fit_options, lo, hi)

    rows = []
    for a_idx, alpha in enumerate(spec.alphas):
        col = flags[:, a_idx]
        failures = int(np.sum(col == -1))
        if failures >= max(1, math.ceil(0.01 * reps)) and failures > 0:
            raise AnalysisError(
                f"{failures}/{reps} replications failed at alpha={alpha:g} (over the 1% budget)"
            )
        denom = reps - failures
        rejections = int(np.sum(col == 1))
        rate = rejections / denom
        rows.append(
            ExperimentRow(
                scenario=spec.name,
                n=spec.n,
                alpha=alpha,
                rejections=rejections,
                reps=denom,
                rate=rate,
                mc_se=math.sqrt(rate * (1.0 - rate) / denom),
                failures=failures,
            )
        )
    return ExperimentResult(rows=tuple(rows))


def with_seed(spec: ScenarioSpec, seed: int) -> ScenarioSpec:
    return replace(spec, seed=seed)
