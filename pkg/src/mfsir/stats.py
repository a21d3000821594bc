"""Friedman test and Nemenyi post-hoc comparison of several algorithms over several datasets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

# Studentized range at alpha = 0.05 divided by sqrt(2), for 2..10 algorithms.
Q_ALPHA_005 = {
    2: 1.960, 3: 2.343, 4: 2.569, 5: 2.728, 6: 2.850,
    7: 2.949, 8: 3.031, 9: 3.102, 10: 3.164,
}


@dataclass(frozen=True)
class MetricTable:
    values: np.ndarray          # datasets x algorithms
    higher_is_better: bool
    algorithm_names: tuple[str, ...]
    dataset_names: tuple[str, ...]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 2 or v.shape[1] < 2:
            raise ValueError("need at least 2 datasets and 2 algorithms")
        if not np.all(np.isfinite(v)):
            raise ValueError("metric table contains non-finite values")
        if len(self.algorithm_names) != v.shape[1] or len(self.dataset_names) != v.shape[0]:
            raise ValueError("name lists do not match table shape")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "algorithm_names", tuple(self.algorithm_names))
        object.__setattr__(self, "dataset_names", tuple(self.dataset_names))

    @classmethod
    def from_values(cls, values, higher_is_better=False, algorithm_names=None, dataset_names=None):
        v = np.asarray(values, dtype=float)
        algorithm_names = algorithm_names or [f"A{j}" for j in range(v.shape[1])]
        dataset_names = dataset_names or [f"D{i}" for i in range(v.shape[0])]
        return cls(v, higher_is_better, tuple(algorithm_names), tuple(dataset_names))


@dataclass(frozen=True)
class FriedmanResult:
    avg_ranks: np.ndarray
    chi2_f: float
    f_f: float
    df1: int
    df2: int


class PerfectSeparation(ArithmeticError):
    """The F_F denominator vanished: every dataset ranks the algorithms identically."""

    def __init__(self, avg_ranks, chi2_f):
        super().__init__(f"perfect separation (chi2_F = {chi2_f:g})")
        self.avg_ranks = avg_ranks
        self.chi2_f = chi2_f


def dataset_ranks(t: MetricTable) -> np.ndarray:
    """Rank algorithms within every dataset (best = 1, ties get mid-ranks)."""
    v = -t.values if t.higher_is_better else t.values
    return rankdata(v, method="average", axis=1)


def average_ranks(t: MetricTable) -> np.ndarray:
    return dataset_ranks(t).mean(axis=0)


def friedman_chi2(avg_ranks, theta: int) -> float:
    r = np.asarray(avg_ranks, dtype=float)
    g = r.size
    return 12.0 * theta / (g * (g + 1)) * (np.sum(r**2) - g * (g + 1) ** 2 / 4.0)


def friedman(t: MetricTable) -> FriedmanResult:
    theta, gamma = t.values.shape
    ranks = average_ranks(t)
    chi2 = max(friedman_chi2(ranks, theta), 0.0)
    denom = theta * (gamma - 1) - chi2
    if abs(denom) <= 1e-12 * theta * gamma:
        raise PerfectSeparation(ranks, chi2)
    f_f = (theta - 1) * chi2 / denom
    return FriedmanResult(ranks, chi2, f_f, gamma - 1, (gamma - 1) * (theta - 1))


def nemenyi_cd(gamma: int, theta: int, q_alpha: float | None = None) -> float:
    """Critical difference of average ranks for the Nemenyi test."""
    if gamma < 2 or theta < 1:
        raise ValueError("need gamma >= 2 and theta >= 1")
    if q_alpha is None:
        if gamma not in Q_ALPHA_005:
            raise ValueError(f"no tabulated q_alpha for {gamma} algorithms; pass q_alpha")
        q_alpha = Q_ALPHA_005[gamma]
    if not q_alpha > 0:
        raise ValueError("q_alpha must be positive")
    return q_alpha * math.sqrt(gamma * (gamma + 1) / (6.0 * theta))


def pairwise_significance(ranks: Sequence[float], cd: float) -> np.ndarray:
    r = np.asarray(ranks, dtype=float)
    # small slack so that a difference exactly equal to cd survives rounding
    sig = np.abs(r[:, None] - r[None, :]) >= cd - 1e-12
    np.fill_diagonal(sig, False)
    return sig
