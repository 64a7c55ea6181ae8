"""Cauchy weight mutation and per-generation neighbor sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from evolvability._seeding import rng_for, substream
from evolvability.genotype import Genotype


@dataclass(frozen=True)
class MutationConfig:
    scale: float = 0.05
    per_weight_prob: float = 1.0
    offspring_count: int = 30

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("mutation scale must be positive")
        if not 0 < self.per_weight_prob <= 1:
            raise ValueError("per_weight_prob must be in (0, 1]")
        if self.offspring_count < 2:
            raise ValueError("offspring_count must be at least 2")


@dataclass(frozen=True, eq=False)
class OffspringSet:
    """Children of one parent, as a weight matrix plus their behaviors."""

    parent: Genotype
    weights: np.ndarray
    behaviors: np.ndarray

    def __len__(self):
        return self.weights.shape[0]

    def child(self, i: int) -> Genotype:
        return Genotype(self.weights[i], self.parent.shape)

    @property
    def children(self) -> list[tuple[Genotype, np.ndarray]]:
        return [(self.child(i), self.behaviors[i]) for i in range(len(self))]


def perturbation(size: int, cfg: MutationConfig, rng: np.random.Generator) -> np.ndarray:
    """Additive Cauchy noise; non-finite draws are redrawn, not clipped."""
    delta = cfg.scale * rng.standard_cauchy(size)
    bad = ~np.isfinite(delta)
    while bad.any():
        delta[bad] = cfg.scale * rng.standard_cauchy(int(bad.sum()))
        bad = ~np.isfinite(delta)
    if cfg.per_weight_prob < 1.0:
        delta[rng.random(size) >= cfg.per_weight_prob] = 0.0
    return delta


def mutate_weights(weights: np.ndarray, cfg: MutationConfig, rng: np.random.Generator) -> np.ndarray:
    while True:
        child = weights + perturbation(weights.size, cfg, rng)
        if np.all(np.isfinite(child)):
            return child


def mutate(g: Genotype, cfg: MutationConfig, seed) -> Genotype:
    return Genotype(mutate_weights(g.weights, cfg, rng_for(seed)), g.shape)


def sample_neighbors(g: Genotype, cfg: MutationConfig, phi, seed) -> OffspringSet:
    """Draw ``cfg.offspring_count`` mutants of ``g`` and evaluate them with ``phi``.

    Child ``i`` uses the substream ``(seed, i)``, so the set does not depend on
    evaluation order.
    """
    m = cfg.offspring_count
    weights = np.empty((m, g.weights.size))
    for i in range(m):
        weights[i] = mutate_weights(g.weights, cfg, np.random.default_rng(substream(seed, i)))
    behaviors = np.asarray(phi.batch(weights), dtype=np.float64)
    return OffspringSet(g, weights, behaviors)
