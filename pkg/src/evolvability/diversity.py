"""Novelty-style fitness metrics over behavior vectors, and the bounded archive.

Single-candidate functions (``knn_novelty``, ``kde_novelty`` ...) are the
reference definitions. :func:`score_offspring` scores a whole offspring batch
at once through the compiled kernels; each child's pool is its siblings plus
(optionally) the archive, never the child itself.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from evolvability import kernels
from evolvability._seeding import rng_for

METRIC_NAMES = ("knn", "knn_noarchive", "parent", "ancestors", "kde")


class UndefinedNoveltyError(ValueError):
    """Novelty needs at least one other behavior to compare against."""


class Archive:
    """FIFO archive with random admission.

    Entries are ``(behavior, insertion_step)``; when full, the oldest entry is
    dropped.
    """

    def __init__(self, capacity: int = 1200, admission_prob: float = 0.10, dim: int = 2):
        if capacity < 1:
            raise ValueError("archive capacity must be >= 1")
        if not 0.0 <= admission_prob <= 1.0:
            raise ValueError("admission_prob must be a probability")
        self.capacity = int(capacity)
        self.admission_prob = float(admission_prob)
        self.dim = int(dim)
        self._entries: deque = deque(maxlen=self.capacity)
        self._cache = None

    def __len__(self):
        return len(self._entries)

    @property
    def entries(self) -> list[tuple[np.ndarray, int]]:
        return list(self._entries)

    def add(self, behavior, step: int):
        b = np.array(behavior, dtype=np.float64).ravel()
        if self._entries and step < self._entries[-1][1]:
            raise ValueError("insertion steps must be non-decreasing")
        self._entries.append((b, int(step)))
        self._cache = None

    def maybe_add(self, behavior, step: int, rng: np.random.Generator) -> bool:
        # one uniform per call regardless of the probability, for stream stability
        if rng.random() < self.admission_prob:
            self.add(behavior, step)
            return True
        return False

    def behaviors(self) -> np.ndarray:
        if self._cache is None:
            if self._entries:
                self._cache = (
                    np.stack([b for b, _ in self._entries]),
                    np.array([s for _, s in self._entries], dtype=np.int64),
                )
            else:
                self._cache = (np.empty((0, self.dim)), np.empty(0, dtype=np.int64))
        return self._cache[0]

    def insertion_steps(self) -> np.ndarray:
        self.behaviors()
        return self._cache[1]

    def copy(self) -> "Archive":
        other = Archive(self.capacity, self.admission_prob, self.dim)
        other._entries.extend((b.copy(), s) for b, s in self._entries)
        return other


def archive_maybe_admit(archive: Archive, b, step: int, seed) -> Archive:
    archive.maybe_add(b, step, rng_for(seed))
    return archive


@dataclass(frozen=True)
class KdeConfig:
    """Isotropic Gaussian kernel ``H = h^2 I`` with age discount ``discount**age``."""

    bandwidth: float = 0.5
    discount: float = 1.0

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if not 0 < self.discount <= 1:
            raise ValueError("discount must be in (0, 1] so weights never grow with age")

    def weight(self, age):
        return np.power(self.discount, np.asarray(age, dtype=np.float64))


@dataclass(frozen=True)
class DiversityMetric:
    kind: str = "knn"
    k: int = 15
    use_archive: bool = True
    kde: KdeConfig = field(default_factory=KdeConfig)

    def __post_init__(self):
        if self.kind not in ("knn", "parent", "ancestors", "kde"):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    @property
    def name(self) -> str:
        if self.kind == "knn" and not self.use_archive:
            return "knn_noarchive"
        return self.kind


def metric_from_name(name: str, k: int = 15, bandwidth: float = 0.5, discount: float = 1.0):
    if name not in METRIC_NAMES:
        raise ValueError(f"metric must be one of {METRIC_NAMES}, got {name!r}")
    if name == "knn_noarchive":
        return DiversityMetric("knn", k=k, use_archive=False)
    return DiversityMetric(name, k=k, kde=KdeConfig(bandwidth, discount))


def _as_points(points, dim=None) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.size == 0:
        return np.empty((0, dim if dim is not None else 0))
    return np.atleast_2d(arr)


def _euclid(a, b) -> np.ndarray:
    return np.sqrt(np.sum((np.asarray(a) - np.asarray(b)) ** 2, axis=-1))


def knn_novelty(candidate, peers, archive: Archive | None = None, k: int = 15) -> float:
    """Sum of distances to the ``k`` nearest members of ``peers`` plus the archive.

    ``peers`` must not contain the candidate itself. With fewer than ``k``
    pool members, all of them are used.
    """
    c = np.asarray(candidate, dtype=np.float64)
    pool = [_as_points(peers, c.size)]
    if archive is not None and len(archive):
        pool.append(archive.behaviors())
    pool = np.concatenate(pool, axis=0)
    if pool.shape[0] == 0:
        raise UndefinedNoveltyError("empty comparison pool")
    dist = _euclid(pool, c)
    order = np.argsort(dist, kind="stable")
    return float(dist[order[:k]].sum())


def parent_distance(candidate, parent) -> float:
    c, p = np.asarray(candidate, dtype=np.float64), np.asarray(parent, dtype=np.float64)
    if c.shape != p.shape:
        raise ValueError(f"dimension mismatch: {c.shape} vs {p.shape}")
    return float(math.sqrt(np.sum((c - p) ** 2)))


def ancestor_chain_distance(candidate, ancestors) -> float:
    """Summed distance from the candidate to every ancestor, root to parent."""
    chain = _as_points(ancestors)
    if chain.shape[0] == 0:
        raise ValueError("ancestor chain is empty")
    return float(_euclid(chain, candidate).sum())


def gaussian_kernel(x, bandwidth: float) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    d = x.shape[1]
    # |H|^{-1/2} = h^{-d} for H = h^2 I
    norm = (2.0 * math.pi) ** (-d / 2.0) * bandwidth ** (-d)
    return norm * np.exp(-0.5 * np.sum(x * x, axis=1) / bandwidth**2)


def kde_novelty(candidate, peers, archive: Archive | None, cfg: KdeConfig, current_step: int = 0) -> float:
    """Negative mean kernel density at the candidate; larger means more novel.

    Peers count with age 0; archive entries are weighted by
    ``cfg.discount ** (current_step - insertion_step)``.
    """
    c = np.asarray(candidate, dtype=np.float64)
    peers = _as_points(peers, c.size)
    pts = [peers]
    weights = [np.ones(peers.shape[0])]
    if archive is not None and len(archive):
        pts.append(archive.behaviors())
        weights.append(cfg.weight(current_step - archive.insertion_steps()))
    pts = np.concatenate(pts, axis=0)
    if pts.shape[0] == 0:
        raise UndefinedNoveltyError("empty comparison pool")
    weights = np.concatenate(weights)
    dens = gaussian_kernel(c[None, :] - pts, cfg.bandwidth)
    return float(-(dens * weights).sum() / pts.shape[0])


def score_offspring(
    metric: DiversityMetric,
    behaviors,
    parent_behavior=None,
    ancestors=None,
    archive: Archive | None = None,
    step: int = 0,
) -> np.ndarray:
    """Metric value for every child in an offspring batch."""
    b = np.ascontiguousarray(behaviors, dtype=np.float64)
    m, d = b.shape
    if metric.kind == "parent":
        return _euclid(b, np.asarray(parent_behavior, dtype=np.float64))
    if metric.kind == "ancestors":
        chain = _as_points(ancestors, d)
        if chain.shape[0] == 0:
            raise ValueError("ancestor chain is empty")
        return np.sqrt(((b[:, None, :] - chain[None, :, :]) ** 2).sum(-1)).sum(axis=1)
    use_archive = archive is not None and len(archive) and (metric.kind == "kde" or metric.use_archive)
    arch = np.ascontiguousarray(archive.behaviors()) if use_archive else np.empty((0, d))
    if m - 1 + arch.shape[0] == 0:
        raise UndefinedNoveltyError("empty comparison pool")
    if metric.kind == "knn":
        return kernels.knn_scores(b, arch, int(metric.k))
    weights = (
        metric.kde.weight(step - archive.insertion_steps()) if use_archive else np.empty(0)
    )
    return kernels.kde_scores(b, arch, np.ascontiguousarray(weights), float(metric.kde.bandwidth))
