"""Single-state walks on a behavior landscape.

A walk keeps one parent. Each step samples an offspring set, measures it, and
picks the next parent with one of four rules: highly selective (argmax of the
diversity metric), niche-changing selective, adaptive (uniform among the top
fraction) or random.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from evolvability._seeding import rng_for, substream
from evolvability.diversity import Archive, DiversityMetric, score_offspring
from evolvability.genotype import Genotype, genotype_digest, xavier_init
from evolvability.landscape import MetricReport, metric_report
from evolvability.niches import NicheGrid
from evolvability.variation import MutationConfig, sample_neighbors

WALK_KINDS = ("selective", "selective_niche", "adaptive", "random")

# stream ids under a walk's seed
_INIT, _OFFSPRING, _SELECT, _ARCHIVE = 0, 1, 2, 3


@dataclass(frozen=True)
class WalkConfig:
    kind: str = "selective"
    top_fraction: float = 1.0
    length: int = 50
    metric: DiversityMetric = field(default_factory=DiversityMetric)
    mutation: MutationConfig = field(default_factory=MutationConfig)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in WALK_KINDS:
            raise ValueError(f"walk kind must be one of {WALK_KINDS}, got {self.kind!r}")
        if self.length < 1:
            raise ValueError("walk length must be >= 1")
        if not 0 < self.top_fraction <= 1:
            raise ValueError("top_fraction must be in (0, 1]")

    def effective_top_fraction(self) -> float:
        if self.kind == "selective":
            return 1.0 / self.mutation.offspring_count
        if self.kind == "random":
            return 1.0
        return self.top_fraction

    @property
    def pressure(self) -> float:
        """0 for a random walk, approaching 1 for the highly selective walk."""
        return 1.0 - self.effective_top_fraction()

    @property
    def label(self) -> str:
        if self.kind == "adaptive":
            return f"adaptive({self.top_fraction:g})"
        return self.kind


@dataclass
class WalkStep:
    step: int
    parent_digest: str
    parent_behavior: np.ndarray
    report: MetricReport
    chosen: int | None
    g_values: np.ndarray | None
    archive_size: int


@dataclass
class WalkRecord:
    config: WalkConfig
    steps: list[WalkStep]
    final: Genotype
    stall_count: int = 0

    def series(self, name: str = "evolvability_expected") -> np.ndarray:
        return np.array([getattr(s.report, name) for s in self.steps])


def adaptive_quota(top_fraction: float, m: int) -> int:
    # 1e-9 guards ceil against 1/m * m landing a hair above 1
    return int(min(m, max(1, math.ceil(top_fraction * m - 1e-9))))


def step_selective(g_values) -> int:
    """Index of the best child; the lowest index wins ties."""
    return int(np.argmax(np.asarray(g_values, dtype=np.float64)))


def step_selective_niche(parent_niche: int, child_niches, g_values) -> int | None:
    """Best child outside the parent's niche, or ``None`` to keep the parent."""
    g = np.asarray(g_values, dtype=np.float64)
    feasible = np.flatnonzero(np.asarray(child_niches) != parent_niche)
    if feasible.size == 0:
        return None
    return int(feasible[np.argmax(g[feasible])])


def adaptive_qualifiers(g_values, top_fraction: float) -> np.ndarray:
    """Indices (ascending) of the ``ceil(top_fraction * m)`` best children."""
    g = np.asarray(g_values, dtype=np.float64)
    q = adaptive_quota(top_fraction, g.size)
    order = np.argsort(-g, kind="stable")
    return np.sort(order[:q])


def step_adaptive(g_values, top_fraction: float, seed) -> int:
    """Uniform draw among children whose metric clears the top-fraction threshold.

    The threshold is set each step so that exactly ``ceil(top_fraction * m)``
    children qualify (ties broken toward lower index), which means the set is
    never empty.
    """
    qual = adaptive_qualifiers(g_values, top_fraction)
    return int(qual[rng_for(seed).integers(qual.size)])


def step_random(m: int, seed) -> int:
    return int(rng_for(seed).integers(m))


def run_walk(
    cfg: WalkConfig,
    phi,
    start: Genotype | None = None,
    archive: Archive | None = None,
    grid: NicheGrid | None = None,
) -> WalkRecord:
    """Generate one walk of ``cfg.length`` steps.

    Args:
        cfg: walk rule, metric, mutation and seed.
        phi: behavior function with ``shape``, ``dim`` and ``batch``.
        start: initial genotype; Xavier-initialised from the seed if omitted.
        archive: archive to read and update in place; a fresh default one if omitted.
        grid: niche grid, needed for ``selective_niche`` and for niche coverage.

    Returns:
        The per-step record. Each step's metrics describe the offspring of that
        step's parent, measured before selection.
    """
    if cfg.kind == "selective_niche" and grid is None:
        raise ValueError("selective_niche walks need a niche grid")
    if archive is None:
        archive = Archive(dim=phi.dim)
    parent = start if start is not None else xavier_init(phi.shape, substream(cfg.seed, _INIT))
    parent_b = np.asarray(phi(parent), dtype=np.float64)
    ancestors = [parent_b]
    archive_rng = rng_for(cfg.seed, _ARCHIVE)
    steps = []
    stalls = 0
    for i in range(cfg.length):
        off = sample_neighbors(parent, cfg.mutation, phi, substream(cfg.seed, _OFFSPRING, i))
        report = metric_report(parent_b, off.behaviors, grid)
        select_seed = substream(cfg.seed, _SELECT, i)
        g = None
        if cfg.kind == "random":
            chosen = step_random(len(off), select_seed)
        else:
            g = score_offspring(cfg.metric, off.behaviors, parent_b, np.stack(ancestors), archive, step=i)
            if cfg.kind == "selective":
                chosen = step_selective(g)
            elif cfg.kind == "adaptive":
                chosen = step_adaptive(g, cfg.top_fraction, select_seed)
            else:
                chosen = step_selective_niche(
                    int(grid.niche_of(parent_b)[0]), grid.niche_of(off.behaviors), g
                )
        steps.append(
            WalkStep(i, genotype_digest(parent), parent_b, report, chosen, g, len(archive))
        )
        if chosen is None:
            stalls += 1
        else:
            parent = off.child(chosen)
            parent_b = off.behaviors[chosen].copy()
        ancestors.append(parent_b)
        archive.maybe_add(parent_b, i + 1, archive_rng)
    return WalkRecord(cfg, steps, parent, stalls)
