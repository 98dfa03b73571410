"""Monte Carlo critical values for the sup of squared Brownian-bridge norms.

Each replication draws ``d`` independent Gaussian random walks on an
equispaced grid of ``grid_steps`` points, forms the bridges
``B(s_j) = (W_j - (j/N) W_N) / sqrt(N)``, and records the grid maximum of
``sum_m B_m(s_j)**2`` (statistic ``sup_norm_sq``) or of ``|B(s_j)|``
(statistic ``sup_abs``, one-dimensional, used by the residual test).

Replication ``i`` always uses substream ``i`` of the seed, so tables are
bit-identical for any worker count.  Tables are cached as plain text:
a commented header carrying the full parameter key (including the generator
algorithm id) followed by one sorted sample per line.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .rng import ALGORITHM_ID, substream

FORMAT_VERSION = 1
DEFAULT_GRID_STEPS = 5000
DEFAULT_REPLICATIONS = 50000
DEFAULT_SEED = 20260
DEFAULT_LEVELS = (0.90, 0.95, 0.99)
CACHE_ENV_VAR = "DPDCUSUM_CACHE_DIR"

SUP_NORM_SQ = "sup_norm_sq"
SUP_ABS = "sup_abs"
_BLOCK = 512


@dataclass(frozen=True)
class CritTable:
    """Sorted Monte Carlo sample of the limiting sup statistic."""

    dim: int
    grid_steps: int
    replications: int
    seed: int
    statistic: str
    samples: np.ndarray
    algorithm: str = ALGORITHM_ID
    quantiles: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=np.float64)
        arr = np.sort(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        if not self.quantiles:
            object.__setattr__(
                self, "quantiles", {lv: quantile(self, lv) for lv in DEFAULT_LEVELS}
            )


def quantile(table: CritTable, level: float) -> float:
    """Empirical quantile by order statistics."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    r = table.samples.size
    idx = min(max(int(np.ceil(level * r)) - 1, 0), r - 1)
    return float(table.samples[idx])


def p_value(table: CritTable, stat: float) -> float:
    """Monte Carlo p-value (r + 1) / (R + 1), r = #{samples >= stat}."""
    if stat < 0:
        raise ValueError(f"statistic must be >= 0, got {stat}")
    r = table.samples.size - int(np.searchsorted(table.samples, stat, side="left"))
    return (r + 1) / (table.samples.size + 1)


def quantile_se(table: CritTable, level: float) -> float:
    """Large-sample standard error of the empirical quantile at ``level``.

    Uses a central difference of neighbouring quantiles to estimate the
    density in the denominator of the asymptotic variance.
    """
    r = table.samples.size
    delta = min(0.01, level / 2, (1 - level) / 2)
    spread = quantile(table, level + delta) - quantile(table, level - delta)
    if spread <= 0:
        spread = 1e-12
    density = 2 * delta / spread
    return float(np.sqrt(level * (1 - level) / r) / density)


def _sup_one(gen: np.random.Generator, d: int, n_steps: int, frac: np.ndarray, kind: str) -> float:
    z = gen.standard_normal((d, n_steps))
    w = np.cumsum(z, axis=1)
    b = (w - frac * w[:, -1:]) / np.sqrt(n_steps)
    if kind == SUP_NORM_SQ:
        return float(np.max(np.sum(b * b, axis=0)))
    return float(np.max(np.abs(b)))


def _sup_block(kind: str, d: int, grid_steps: int, seed: int, lo: int, hi: int) -> np.ndarray:
    frac = np.arange(1, grid_steps + 1) / grid_steps
    out = np.empty(hi - lo)
    for i in range(lo, hi):
        out[i - lo] = _sup_one(substream(seed, i), d, grid_steps, frac, kind)
    return out


def _simulate(kind: str, d: int, grid_steps: int, replications: int, seed: int, threads: int) -> CritTable:
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if grid_steps < 2 or replications < 2:
        raise ValueError("grid_steps and replications must both be >= 2")
    sups = np.empty(replications)
    blocks = [(lo, min(lo + _BLOCK, replications)) for lo in range(0, replications, _BLOCK)]
    if threads > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [
                (lo, pool.submit(_sup_block, kind, d, grid_steps, seed, lo, hi))
                for lo, hi in blocks
            ]
            for lo, fut in futures:
                chunk = fut.result()
                sups[lo : lo + chunk.size] = chunk
    else:
        for lo, hi in blocks:
            sups[lo:hi] = _sup_block(kind, d, grid_steps, seed, lo, hi)
    return CritTable(
        dim=d,
        grid_steps=grid_steps,
        replications=replications,
        seed=seed,
        statistic=kind,
        samples=sups,
    )


def simulate_sup_bb_sq(
    d: int,
    grid_steps: int = DEFAULT_GRID_STEPS,
    replications: int = DEFAULT_REPLICATIONS,
    seed: int = DEFAULT_SEED,
    threads: int = 1,
) -> CritTable:
    """Simulate sup over [0,1] of the squared norm of a d-dim Brownian bridge."""
    return _simulate(SUP_NORM_SQ, d, grid_steps, replications, seed, threads)


def simulate_sup_bb_abs(
    grid_steps: int = DEFAULT_GRID_STEPS,
    replications: int = DEFAULT_REPLICATIONS,
    seed: int = DEFAULT_SEED,
    threads: int = 1,
) -> CritTable:
    """Simulate sup over [0,1] of |B(s)| for a scalar Brownian bridge."""
    return _simulate(SUP_ABS, 1, grid_steps, replications, seed, threads)


# -- on-disk cache -----------------------------------------------------------


def cache_dir(explicit: str | None = None) -> str:
    if explicit:
        return explicit
    env = os.environ.get(CACHE_ENV_VAR)
    if env:
        return env
    return os.path.join(os.path.expanduser("~"), ".cache", "dpdcusum")


def _cache_path(directory: str, table_key: dict) -> str:
    name = (
        f"{table_key['statistic']}_d{table_key['dim']}_g{table_key['grid_steps']}"
        f"_r{table_key['replications']}_s{table_key['seed']}_v{FORMAT_VERSION}.txt"
    )
    return os.path.join(directory, name)


def save_table(table: CritTable, directory: str | None = None) -> str:
    directory = cache_dir(directory)
    os.makedirs(directory, exist_ok=True)
    path = _cache_path(
        directory,
        {
            "statistic": table.statistic,
            "dim": table.dim,
            "grid_steps": table.grid_steps,
            "replications": table.replications,
            "seed": table.seed,
        },
    )
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="ascii") as fh:
        fh.write(f"# supbridge-table v{FORMAT_VERSION}\n")
        fh.write(f"# algorithm={table.algorithm}\n")
        fh.write(f"# statistic={table.statistic}\n")
        fh.write(f"# dim={table.dim}\n")
        fh.write(f"# grid_steps={table.grid_steps}\n")
        fh.write(f"# replications={table.replications}\n")
        fh.write(f"# seed={table.seed}\n")
        for v in table.samples:
            fh.write(repr(float(v)) + "\n")
    os.replace(tmp, path)
    return path


def load_table(
    statistic: str,
    d: int,
    grid_steps: int,
    replications: int,
    seed: int,
    directory: str | None = None,
) -> CritTable | None:
    path = _cache_path(
        cache_dir(directory),
        {
            "statistic": statistic,
            "dim": d,
            "grid_steps": grid_steps,
            "replications": replications,
            "seed": seed,
        },
    )
    if not os.path.exists(path):
        return None
    header: dict[str, str] = {}
    samples = []
    with open(path, "r", encoding="ascii") as fh:
        first = fh.readline().strip()
        if first != f"# supbridge-table v{FORMAT_VERSION}":
            return None
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                key, _, val = line.lstrip("# ").partition("=")
                header[key] = val
            elif line:
                samples.append(float(line))
    expected = {
        "algorithm": ALGORITHM_ID,
        "statistic": statistic,
        "dim": str(d),
        "grid_steps": str(grid_steps),
        "replications": str(replications),
        "seed": str(seed),
    }
    if any(header.get(k) != v for k, v in expected.items()):
        return None
    if len(samples) != replications:
        raise DataError(f"corrupt critical-value cache {path}: wrong sample count")
    return CritTable(
        dim=d,
        grid_steps=grid_steps,
        replications=replications,
        seed=seed,
        statistic=statistic,
        samples=np.array(samples),
    )


def get_table(
    d: int,
    statistic: str = SUP_NORM_SQ,
    grid_steps: int = DEFAULT_GRID_STEPS,
    replications: int = DEFAULT_REPLICATIONS,
    seed: int = DEFAULT_SEED,
    directory: str | None = None,
    threads: int = 1,
    use_cache: bool = True,
) -> CritTable:
    """Load the requested table from cache or simulate (and cache) it."""
    if use_cache:
        table = load_table(statistic, d, grid_steps, replications, seed, directory)
        if table is not None:
            return table
    table = _simulate(statistic, d, grid_steps, replications, seed, threads)
    if use_cache:
        save_table(table, directory)
    return table
