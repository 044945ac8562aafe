#!/usr/bin/env python3
"""
Two-sample and goodness-of-fit statistics for equality-in-law checks.

Kolmogorov-Smirnov statistics come from scipy with the asymptotic
Kolmogorov distribution. Empirical characteristic functions and empirical
Laplace transforms give a sup-gap on a grid that stays meaningful for
heavy-tailed samples; the gap threshold is 4/sqrt(n).
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .errors import ParameterError

log = logging.getLogger(__name__)

MIN_SAMPLE = 1000
GAP_CONSTANT = 4.0
SIGNIFICANCE = 1e-3
CHF_GRID = np.linspace(-10.0, 10.0, 201)
LAPLACE_GRID = np.linspace(0.0, 10.0, 101)


def gap_threshold(n: int) -> float:
    return GAP_CONSTANT / math.sqrt(n)


def default_grid(kind: str) -> np.ndarray:
    if kind == "chf":
        return CHF_GRID
    if kind == "laplace":
        return LAPLACE_GRID
    raise ParameterError(f"unknown transform kind '{kind}'")


@dataclass(frozen=True)
class TwoSampleStat:
    """
    KS statistic/p-value and sup transform gap between two samples, or
    between a sample and a target law. ks fields are None when the target
    has no closed CDF.
    """

    ks_stat: Optional[float]
    ks_pvalue: Optional[float]
    ecf_gap: float
    n: int
    threshold: float
    kind: str = "chf"
    heavy_tailed: bool = False

    @property
    def uses_ks(self) -> bool:
        return self.ks_pvalue is not None and not self.heavy_tailed

    def passes(self, significance: float = SIGNIFICANCE) -> bool:
        if self.uses_ks:
            return self.ks_pvalue > significance
        return self.ecf_gap < self.threshold

    @property
    def statistic_name(self) -> str:
        return "ks_pvalue" if self.uses_ks else f"{self.kind}_gap"

    @property
    def value(self) -> float:
        return self.ks_pvalue if self.uses_ks else self.ecf_gap

    def to_dict(self) -> dict:
        return {
            "ks_stat": self.ks_stat,
            "ks_pvalue": self.ks_pvalue,
            "ecf_gap": self.ecf_gap,
            "n": self.n,
            "threshold": self.threshold,
            "kind": self.kind,
            "heavy_tailed": self.heavy_tailed,
        }


def ecf(samples, u_grid) -> np.ndarray:
    """Empirical characteristic function mean(exp(iuX)) on a grid."""
    samples = np.asarray(samples, dtype=float)
    values = np.empty(len(u_grid), dtype=complex)
    for index, u in enumerate(u_grid):
        angle = u * samples
        values[index] = complex(np.cos(angle).mean(), np.sin(angle).mean())
    return values


def empirical_laplace(samples, u_grid) -> np.ndarray:
    """Empirical Laplace transform mean(exp(-uX)) of a nonnegative sample."""
    samples = np.asarray(samples, dtype=float)
    if np.any(samples < 0):
        raise ParameterError("empirical Laplace transform needs nonnegative samples")
    return np.array([np.exp(-u * samples).mean() for u in u_grid])


def _empirical(samples, u_grid, kind: str) -> np.ndarray:
    return ecf(samples, u_grid) if kind == "chf" else empirical_laplace(samples, u_grid)


def transform_gap(samples, target: Callable, u_grid=None, kind: str = "chf") -> float:
    """sup over the grid of |empirical transform - target transform|."""
    u_grid = default_grid(kind) if u_grid is None else np.asarray(u_grid, dtype=float)
    expected = np.asarray(target(u_grid))
    return float(np.max(np.abs(_empirical(samples, u_grid, kind) - expected)))


def _check_size(n: int):
    if n < MIN_SAMPLE:
        raise ParameterError(f"KS statistics need at least {MIN_SAMPLE} samples, got {n}")


def two_sample(x, y, u_grid=None, kind: str = "chf", heavy_tailed: bool = False) -> TwoSampleStat:
    """Compare two independent samples by KS and by the sup gap of their empirical transforms."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = min(x.size, y.size)
    _check_size(n)
    u_grid = default_grid(kind) if u_grid is None else np.asarray(u_grid, dtype=float)
    result = stats.ks_2samp(x, y, method="asymp")
    gap = float(np.max(np.abs(_empirical(x, u_grid, kind) - _empirical(y, u_grid, kind))))
    stat = TwoSampleStat(
        ks_stat=float(result.statistic),
        ks_pvalue=float(result.pvalue),
        ecf_gap=gap,
        n=n,
        threshold=gap_threshold(n),
        kind=kind,
        heavy_tailed=heavy_tailed,
    )
    log.debug(f"two-sample n={n}: ks={stat.ks_stat:.4g} p={stat.ks_pvalue:.4g} gap={gap:.4g}")
    return stat


def one_sample(
    samples,
    cdf: Optional[Callable] = None,
    transform: Optional[Callable] = None,
    u_grid=None,
    kind: str = "chf",
    heavy_tailed: bool = False,
) -> TwoSampleStat:
    """Compare a sample against a target law given by its CDF, its transform, or both."""
    samples = np.asarray(samples, dtype=float)
    if cdf is None and transform is None:
        raise ParameterError("one_sample needs a target cdf or transform")
    _check_size(samples.size)
    ks_stat = ks_pvalue = None
    if cdf is not None:
        result = stats.kstest(samples, cdf, method="asymp")
        ks_stat, ks_pvalue = float(result.statistic), float(result.pvalue)
    gap = transform_gap(samples, transform, u_grid, kind) if transform is not None else math.nan
    return TwoSampleStat(
        ks_stat=ks_stat,
        ks_pvalue=ks_pvalue,
        ecf_gap=gap,
        n=samples.size,
        threshold=gap_threshold(samples.size),
        kind=kind,
        heavy_tailed=heavy_tailed or cdf is None,
    )
