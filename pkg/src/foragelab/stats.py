"""Small-sample comparisons between seed-paired final counts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import ContractViolation, InsufficientSamplesError

MIN_SAMPLES = 5


@dataclass(frozen=True)
class MannWhitney:
    u: float
    """U statistic of the first sample: pairs with x > y, plus half the ties."""
    p_value: float
    """Two-sided normal-approximation p-value (tie and continuity corrected)."""


def mann_whitney_u(x: Sequence[float], y: Sequence[float]) -> MannWhitney:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size == 0 or y.size == 0:
        raise InsufficientSamplesError("Mann-Whitney U needs two non-empty samples")
    if np.ptp(np.concatenate([x, y])) == 0:
        # all values tied: zero variance, no evidence of a difference
        return MannWhitney(x.size * y.size / 2.0, 1.0)
    res = stats.mannwhitneyu(x, y, alternative="two-sided", method="asymptotic", use_continuity=True)
    return MannWhitney(float(res.statistic), float(res.pvalue))


def relative_change(baseline: Sequence[float], variant: Sequence[float]) -> float:
    """(median(variant) - median(baseline)) / median(baseline).

    A zero baseline median gives 0 for a zero variant median and ``inf``
    otherwise.
    """
    mb = float(np.median(baseline))
    mv = float(np.median(variant))
    if mb == 0.0:
        return 0.0 if mv == 0.0 else math.copysign(math.inf, mv)
    return (mv - mb) / abs(mb)


def relative_drop(baseline: Sequence[float], variant: Sequence[float]) -> float:
    return -relative_change(baseline, variant)


def _check_paired(baseline: Sequence[float], variant: Sequence[float]) -> None:
    if len(baseline) != len(variant):
        raise ContractViolation(f"seed-paired samples differ in length: {len(baseline)} vs {len(variant)}")
    if len(baseline) < MIN_SAMPLES:
        raise InsufficientSamplesError(f"need at least {MIN_SAMPLES} paired samples, got {len(baseline)}")


def significant_drop(baseline_finals: Sequence[float], variant_finals: Sequence[float],
                     alpha: float = 0.05, min_rel_drop: float = 0.2) -> bool:
    """Median relative drop >= ``min_rel_drop`` and Mann-Whitney rejects at ``alpha``."""
    _check_paired(baseline_finals, variant_finals)
    if relative_drop(baseline_finals, variant_finals) < min_rel_drop:
        return False
    return mann_whitney_u(baseline_finals, variant_finals).p_value < alpha


def significant_change(baseline_finals: Sequence[float], variant_finals: Sequence[float],
                       alpha: float = 0.05, min_rel_drop: float = 0.2) -> bool:
    """Two-sided counterpart of :func:`significant_drop`."""
    _check_paired(baseline_finals, variant_finals)
    if abs(relative_change(baseline_finals, variant_finals)) < min_rel_drop:
        return False
    return mann_whitney_u(baseline_finals, variant_finals).p_value < alpha
