"""Multiple change points by binary segmentation over the DPD score test.

Each segment of at least ``2 * min_len`` observations is tested; on
rejection it is split at the estimated change point and both halves are
examined in turn.  The split index is the argmax of the quadratic path
restricted to [min_len, len - min_len], which keeps every final segment at
least ``min_len`` long.  No multiplicity correction is applied across
segments; the per-test level is used as-is.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import critical
from .cusum import TestOutcome, dpd_test
from .errors import AnalysisError
from .fit import FitOptions, FitResult, fit
from .series import Series


@dataclass(frozen=True)
class SegmentTest:
    """One examined segment: 1-based inclusive bounds and the test result."""

    start: int
    end: int
    outcome: TestOutcome | None
    rejected: bool
    error: str | None = None


@dataclass(frozen=True)
class SegmentationResult:
    change_points: tuple[int, ...]
    segments: tuple[tuple[int, int, FitResult | None], ...]
    tests: tuple[SegmentTest, ...]

    def to_dict(self, timestamps: tuple[str, ...] | None = None) -> dict:
        def stamp(pos: int):
            return timestamps[pos - 1] if timestamps else None

        return {
            "change_points": [
                {"position": cp, "timestamp": stamp(cp)} for cp in self.change_points
            ],
            "segments": [
                {
                    "start": s,
                    "end": e,
                    "theta_hat": None if f is None else _params_dict(f.theta_hat),
                    "converged": None if f is None else f.converged,
                }
                for s, e, f in self.segments
            ],
            "tests": [
                {
                    "start": t.start,
                    "end": t.end,
                    "rejected": t.rejected,
                    "statistic": None if t.outcome is None else t.outcome.statistic,
                    "p_value": None if t.outcome is None else t.outcome.p_value,
                    "error": t.error,
                }
                for t in self.tests
            ],
        }


def _params_dict(theta) -> dict:
    out = {}
    for name in ("mu", "sigma2", "omega"):
        if hasattr(theta, name):
            out[name] = float(getattr(theta, name))
    for name in ("arch", "garch"):
        if hasattr(theta, name):
            for i, v in enumerate(getattr(theta, name)):
                out[f"{name}{i + 1}"] = float(v)
    return out


def default_min_len(dim: int) -> int:
    return max(50, 20 * dim)


def segment(
    model,
    x: Series,
    alpha: float,
    crit: critical.CritTable,
    level: float = 0.05,
    min_len: int | None = None,
    fit_options: FitOptions = FitOptions(),
) -> SegmentationResult:
    """Locate multiple change points in ``x``; indices are global, 1-based."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    if min_len is None:
        min_len = default_min_len(model.dim)
    if min_len < model.min_n():
        raise ValueError(f"min_len must be at least {model.min_n()} for {model.name}")

    change_points: list[int] = []
    tests: list[SegmentTest] = []
    final: list[tuple[int, int, FitResult | None]] = []  # 0-based half-open + fit

    queue: deque[tuple[int, int]] = deque([(0, x.n)])
    while queue:
        lo, hi = queue.popleft()
        length = hi - lo
        if length < 2 * min_len:
            final.append((lo, hi, None))
            continue
        sub = x.slice(lo, hi)
        try:
            outcome = dpd_test(model, sub, alpha, crit, level=level, fit_options=fit_options)
        except AnalysisError as exc:
            tests.append(SegmentTest(lo + 1, hi, None, rejected=False, error=str(exc)))
            final.append((lo, hi, None))
            continue
        if outcome.rejected:
            window = outcome.process.quadratic[min_len - 1 : length - min_len]
            split = min_len + int(np.argmax(window))  # 1-based within segment
            tests.append(SegmentTest(lo + 1, hi, outcome, rejected=True))
            change_points.append(lo + split)
            queue.append((lo, lo + split))
            queue.append((lo + split, hi))
        else:
            tests.append(SegmentTest(lo + 1, hi, outcome, rejected=False))
            final.append((lo, hi, outcome.fit))

    segments = []
    for lo, hi, fit_result in sorted(final):
        if fit_result is None:
            try:
                fit_result = fit(model, x.slice(lo, hi), alpha, fit_options)
            except AnalysisError:
                fit_result = None
        segments.append((lo + 1, hi, fit_result))

    return SegmentationResult(
        change_points=tuple(sorted(change_points)),
        segments=tuple(segments),
        tests=tuple(tests),
    )
