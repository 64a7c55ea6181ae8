"""Rank statistics and confidence intervals for walk batches.

The special functions are implemented here (series / Lentz continued
fractions) rather than imported, so p-values carry no scipy dependency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


class UndefinedCorrelationError(ValueError):
    pass


# --------------------------------------------------------------------------- #
# special functions
# --------------------------------------------------------------------------- #


def _gamma_series(a, x):
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cfrac(a, x):
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma ``P(a, x)``."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cfrac(a, x)


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma ``Q(a, x) = 1 - P(a, x)``."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cfrac(a, x)


def chi2_sf(x: float, dof: float) -> float:
    return gammainc_upper(0.5 * dof, 0.5 * x)


def _beta_cfrac(a, b, x):
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta ``I_x(a, b)``."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = math.exp(
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cfrac(a, b, x) / a
    return 1.0 - front * _beta_cfrac(b, a, 1.0 - x) / b


def student_t_sf(t: float, dof: float) -> float:
    tail = 0.5 * betainc(0.5 * dof, 0.5, dof / (dof + t * t))
    return tail if t >= 0 else 1.0 - tail


def student_t_ppf(q: float, dof: float) -> float:
    """Quantile of Student's t by bisection on the CDF."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must be in (0, 1)")
    if q == 0.5:
        return 0.0
    target = 1.0 - q  # survival probability at the answer
    lo, hi = -1.0, 1.0
    while student_t_sf(hi, dof) > target:
        hi *= 2.0
    while student_t_sf(lo, dof) < target:
        lo *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if student_t_sf(mid, dof) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14 * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------- #
# rank statistics
# --------------------------------------------------------------------------- #


def rankdata(values) -> np.ndarray:
    """1-based ranks with ties given their average rank."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    sorted_v = v[order]
    ranks = np.empty(v.size)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> tuple[float, float]:
    """Spearman rank correlation and its two-sided t-approximation p-value."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d and of equal length")
    n = x.size
    if n < 3:
        raise ValueError("spearman needs at least 3 pairs")
    rx, ry = rankdata(x), rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float(np.dot(rx, rx)) * float(np.dot(ry, ry)))
    if denom == 0.0:
        raise UndefinedCorrelationError("correlation is undefined for a constant input")
    rho = max(-1.0, min(1.0, float(np.dot(rx, ry)) / denom))
    if abs(rho) == 1.0:
        return rho, 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return rho, min(1.0, 2.0 * student_t_sf(abs(t), n - 2))


def kruskal_wallis(groups) -> tuple[float, float]:
    """Kruskal-Wallis H with tie correction and its chi-square p-value."""
    groups = [np.asarray(g, dtype=np.float64).ravel() for g in groups]
    if len(groups) < 2 or any(g.size == 0 for g in groups):
        raise ValueError("need at least two non-empty groups")
    data = np.concatenate(groups)
    n = data.size
    ranks = rankdata(data)
    _, tie_sizes = np.unique(data, return_counts=True)
    correction = 1.0 - float(np.sum(tie_sizes**3 - tie_sizes)) / (n**3 - n)
    if correction <= 0.0:
        return 0.0, 1.0
    total = 0.0
    start = 0
    for g in groups:
        r = ranks[start:start + g.size]
        total += r.sum() ** 2 / g.size
        start += g.size
    h = (12.0 / (n * (n + 1)) * total - 3.0 * (n + 1)) / correction
    return float(h), chi2_sf(h, len(groups) - 1)


# --------------------------------------------------------------------------- #
# series summaries
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class SeriesSummary:
    mean: np.ndarray
    ci95_half_width: np.ndarray
    run_count: int


def summarize(series) -> SeriesSummary:
    """Per-step mean and Student-t 95% half-width across runs."""
    rows = [np.asarray(s, dtype=np.float64).ravel() for s in series]
    if not rows:
        raise ValueError("no runs to summarize")
    if len({r.size for r in rows}) != 1:
        raise ValueError("all runs must have the same length")
    data = np.stack(rows)
    runs = data.shape[0]
    mean = data.mean(axis=0)
    if runs < 2:
        return SeriesSummary(mean, np.zeros_like(mean), runs)
    sem = data.std(axis=0, ddof=1) / math.sqrt(runs)
    # constant columns: the mean can be off by an ulp, which would leak into std
    flat = np.ptp(data, axis=0) == 0
    mean[flat] = data[0, flat]
    sem[flat] = 0.0
    return SeriesSummary(mean, student_t_ppf(0.975, runs - 1) * sem, runs)
