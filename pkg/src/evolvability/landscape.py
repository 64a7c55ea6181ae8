"""Sensitivity and evolvability estimates from a sampled offspring set.

All functions take behavior vectors (rows of an ``(m, d)`` array). Pairwise
estimators range over the children only; the parent is not a member of its
own neighbor set.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from evolvability import kernels
from evolvability.niches import NicheGrid

EPSILON = 1e-12


@dataclass(frozen=True)
class MetricReport:
    ls_max: float
    ls_expected: float
    evolvability_max: float
    evolvability_expected: float
    niche_coverage: float
    ratio_r: float
    ratio_r_star: float

    def as_dict(self):
        return asdict(self)


def _children(children_b, minimum: int) -> np.ndarray:
    arr = np.asarray(children_b, dtype=np.float64)
    count = 0 if arr.size == 0 else np.atleast_2d(arr).shape[0]
    if count < minimum:
        raise ValueError(f"need at least {minimum} children, got {count}")
    return np.ascontiguousarray(np.atleast_2d(arr))


def _parent_distances(parent_b, children_b) -> np.ndarray:
    c = _children(children_b, 1)
    return np.sqrt(np.sum((c - np.asarray(parent_b, dtype=np.float64)) ** 2, axis=1))


def local_sensitivity_max(parent_b, children_b) -> float:
    return float(_parent_distances(parent_b, children_b).max())


def local_sensitivity_expected(parent_b, children_b) -> float:
    return float(_parent_distances(parent_b, children_b).mean())


def evolvability_expected(children_b) -> float:
    """Mean distance over unordered child pairs.

    Identical to the ordered-pair sum divided by ``m (m - 1)``.
    """
    mean, _ = kernels.pairwise_mean_max(_children(children_b, 2))
    return float(mean)


def evolvability_max(children_b) -> float:
    """Diameter of the children's behavior cloud."""
    _, best = kernels.pairwise_mean_max(_children(children_b, 2))
    return float(best)


def population_evolvability(generation_b) -> float:
    return evolvability_expected(generation_b)


def niche_coverage(children_b, grid: NicheGrid) -> float:
    """Fraction of grid cells occupied by at least one child."""
    c = _children(children_b, 1)
    return len(np.unique(grid.niche_of(c))) / grid.n


def dissimila_ratios(parent_b, children_b, epsilon: float = EPSILON) -> tuple[float, float]:
    """``(r, r*)``: evolvability over local sensitivity, max and expected forms.

    Small values flag genotypes whose children move far from the parent but stay
    close to each other.
    """
    c = _children(children_b, 2)
    dist = _parent_distances(parent_b, c)
    mean, best = kernels.pairwise_mean_max(c)
    return float(best / (dist.max() + epsilon)), float(mean / (dist.mean() + epsilon))


def global_sensitivity(samples) -> float:
    """Largest sampled local sensitivity over ``(parent_b, children_b)`` pairs."""
    samples = list(samples)
    if not samples:
        raise ValueError("global sensitivity needs at least one parent")
    return max(local_sensitivity_max(p, c) for p, c in samples)


def metric_report(parent_b, children_b, grid: NicheGrid | None = None, epsilon: float = EPSILON) -> MetricReport:
    c = _children(children_b, 2)
    dist = _parent_distances(parent_b, c)
    mean, best = kernels.pairwise_mean_max(c)
    ls_max, ls_mean = float(dist.max()), float(dist.mean())
    return MetricReport(
        ls_max=ls_max,
        ls_expected=ls_mean,
        evolvability_max=float(best),
        evolvability_expected=float(mean),
        niche_coverage=niche_coverage(c, grid) if grid is not None else float("nan"),
        ratio_r=float(best / (ls_max + epsilon)),
        ratio_r_star=float(mean / (ls_mean + epsilon)),
    )
