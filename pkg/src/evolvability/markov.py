"""Long-sighted evolvability on a discretised behavior space.

Niche-to-niche child placement is summarised as a row-stochastic matrix
estimated with an elites-grid exploration. A genotype's descendants are then
simulated as Markov chains over niches: generation 1 is drawn from the
genotype's own child distribution and every later generation from the matrix.
Coverage is the fraction of niches visited by generations ``1..l`` across ``U``
independent lineages.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from evolvability import kernels
from evolvability._seeding import rng_for, substream
from evolvability.genotype import Genotype, xavier_init
from evolvability.niches import NicheGrid
from evolvability.variation import MutationConfig, mutate_weights

log = logging.getLogger(__name__)

_FORMAT = "evolvability.transition_matrix"
_CHUNK = 1 << 16


class DegenerateLandscapeWarning(UserWarning):
    pass


class TransitionMatrix:
    """Child-placement probabilities ``t[i, j]`` with the counts behind them.

    Rows without any observation are all zero and flagged in ``observed``;
    the simulator treats them as absorbing.
    """

    def __init__(self, probabilities, counts=None, grid: NicheGrid | None = None):
        p = np.array(probabilities, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("transition matrix must be square")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("transition probabilities must be finite and non-negative")
        sums = p.sum(axis=1)
        live = sums > 0
        if np.any(np.abs(sums[live] - 1.0) > 1e-9):
            raise ValueError("observed rows must sum to 1")
        self.probabilities = p
        self.counts = (
            np.zeros(p.shape, dtype=np.int64) if counts is None else np.array(counts, dtype=np.int64)
        )
        self.grid = grid

    @classmethod
    def from_counts(cls, counts, grid: NicheGrid | None = None):
        c = np.asarray(counts, dtype=np.int64)
        sums = c.sum(axis=1, keepdims=True)
        p = np.divide(c, sums, out=np.zeros(c.shape), where=sums > 0)
        return cls(p, c, grid)

    @property
    def n(self) -> int:
        return self.probabilities.shape[0]

    @property
    def observed(self) -> np.ndarray:
        return self.probabilities.sum(axis=1) > 0

    def record(self, parent_niche: int, child_niche: int):
        """Add one observed placement and renormalise that row."""
        self.counts[parent_niche, child_niche] += 1
        row = self.counts[parent_niche]
        self.probabilities[parent_niche] = row / row.sum()

    def to_dict(self):
        return {
            "format": _FORMAT,
            "version": 1,
            "n": self.n,
            "grid": self.grid.to_dict() if self.grid is not None else None,
            "observed": self.observed.tolist(),
            "probabilities": self.probabilities.tolist(),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != _FORMAT:
            raise ValueError("not a serialized transition matrix")
        grid = NicheGrid.from_dict(d["grid"]) if d.get("grid") else None
        return cls(d["probabilities"], d.get("counts"), grid)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class LEvolvabilityEstimate:
    mean_coverage: float
    std_error: float
    l: int
    U: int
    repeats: int
    absorbed_steps: int = 0


def estimate_transition_matrix(
    grid: NicheGrid,
    phi,
    mutation: MutationConfig,
    budget: int,
    seed,
    initial: list[Genotype] | None = None,
    initial_count: int = 10,
    batch_size: int = 1,
) -> TransitionMatrix:
    """Explore with an elites grid and count parent-niche to child-niche moves.

    One elite is kept per discovered niche (first comer stays). Each evaluation
    picks a uniformly random occupied niche, mutates its elite, records the move
    and settles the child in its niche if that niche is empty. With
    ``batch_size > 1`` that many parents are drawn before the batch is
    evaluated; ``batch_size=1`` is the plain sequential loop.
    """
    if budget < grid.n:
        raise ValueError(f"budget {budget} is smaller than the number of niches {grid.n}")
    if initial is None:
        initial = [xavier_init(phi.shape, substream(seed, 0, i)) for i in range(initial_count)]
    elites: dict[int, np.ndarray] = {}
    init_w = np.stack([g.weights for g in initial])
    for w, niche in zip(init_w, grid.niche_of(phi.batch(init_w))):
        elites.setdefault(int(niche), w)
    counts = np.zeros((grid.n, grid.n), dtype=np.int64)
    rng = rng_for(seed, 1)
    done = 0
    while done < budget:
        size = min(batch_size, budget - done)
        occupied = sorted(elites)
        parents = [occupied[j] for j in rng.integers(len(occupied), size=size)]
        children = np.stack([mutate_weights(elites[p], mutation, rng) for p in parents])
        for p, w, c in zip(parents, children, grid.niche_of(phi.batch(children))):
            counts[p, int(c)] += 1
            elites.setdefault(int(c), w)
        done += size
    if len(elites) < 2:
        warnings.warn(
            f"only {len(elites)} niche discovered in {budget} evaluations",
            DegenerateLandscapeWarning,
            stacklevel=2,
        )
    return TransitionMatrix.from_counts(counts, grid)


def child_distribution(g: Genotype, grid: NicheGrid, phi, mutation: MutationConfig, sample_size: int, seed) -> np.ndarray:
    """Empirical niche histogram of ``sample_size`` mutants of ``g``."""
    if sample_size < 1:
        raise ValueError("sample_size must be >= 1")
    w = np.stack(
        [mutate_weights(g.weights, mutation, rng_for(seed, i)) for i in range(sample_size)]
    )
    hist = np.bincount(grid.niche_of(phi.batch(w)), minlength=grid.n)
    return hist / sample_size


def one_hot(niche: int, n: int) -> np.ndarray:
    d = np.zeros(n)
    d[niche] = 1.0
    return d


def _cumulative(rows) -> np.ndarray:
    """Row-wise CDFs with the tail pinned to exactly 1 after the last positive entry."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    cum = np.cumsum(rows, axis=1)
    for r in range(rows.shape[0]):
        nz = np.flatnonzero(rows[r] > 0)
        if nz.size:
            cum[r, nz[-1]:] = 1.0
    return np.ascontiguousarray(cum)


def _check_distribution(D, n):
    D = np.asarray(D, dtype=np.float64)
    if D.shape != (n,) or np.any(D < 0) or abs(D.sum() - 1.0) > 1e-9:
        raise ValueError("initial distribution must be a probability vector over the niches")
    return D


def coverage_counts(T: TransitionMatrix, D, l: int, U: int, repeats: int, seed) -> tuple[np.ndarray, int]:
    """Distinct-niche counts for ``repeats`` independent simulations.

    Uniforms for lineage ``u`` and generation ``g`` come from their own
    substream, so raising ``U`` or ``l`` only appends draws; per-repeat counts
    are then non-decreasing in both.

    Returns:
        ``(counts, absorbed)`` where ``absorbed`` is the number of steps that
        hit an unobserved (absorbing) row.
    """
    if l < 1 or U < 1 or repeats < 1:
        raise ValueError("l, U and repeats must all be >= 1")
    D = _check_distribution(D, T.n)
    cum_t = _cumulative(T.probabilities)
    cum_d = _cumulative(D)[0]
    absorbing = np.ascontiguousarray(~T.observed)
    counts = np.empty(repeats, dtype=np.int64)
    absorbed = 0
    streams = [[rng_for(seed, u, g) for g in range(l)] for u in range(U)]
    for start in range(0, repeats, _CHUNK):
        size = min(_CHUNK, repeats - start)
        uni = np.empty((size, U, l))
        for u in range(U):
            for g in range(l):
                uni[:, u, g] = streams[u][g].random(size)
        c, a = kernels.chain_coverage(cum_t, cum_d, absorbing, uni)
        counts[start:start + size] = c
        absorbed += int(a)
    if absorbed:
        log.info("descendant simulation entered unobserved niches %d times", absorbed)
    return counts, absorbed


def simulate_descendants(T: TransitionMatrix, D, l: int, U: int, seed) -> float:
    """Coverage of one simulation: ``U`` lineages of ``l`` generations."""
    counts, _ = coverage_counts(T, D, l, U, 1, seed)
    return counts[0] / T.n


def l_evolvability_from_distribution(T: TransitionMatrix, D, l: int, U: int, repeats: int, seed) -> LEvolvabilityEstimate:
    counts, absorbed = coverage_counts(T, D, l, U, repeats, seed)
    # average integer counts first so constant outcomes stay exact
    mean = float(counts.mean()) / T.n
    se = float(counts.std(ddof=1)) / T.n / math.sqrt(repeats) if repeats > 1 else float("nan")
    return LEvolvabilityEstimate(mean, se, l, U, repeats, absorbed)


def l_evolvability(
    g: Genotype,
    grid: NicheGrid,
    T: TransitionMatrix,
    phi,
    mutation: MutationConfig,
    l: int,
    U: int,
    repeats: int,
    sample_size: int,
    seed,
) -> LEvolvabilityEstimate:
    """Mean niche coverage of ``g``'s simulated descendants up to generation ``l``."""
    D = child_distribution(g, grid, phi, mutation, sample_size, substream(seed, 0))
    return l_evolvability_from_distribution(T, D, l, U, repeats, substream(seed, 1))


def expected_child_coverage(D, U: int) -> float:
    """Exact expected coverage of ``U`` independent draws from ``D``."""
    D = np.asarray(D, dtype=np.float64)
    return float(np.sum(1.0 - (1.0 - D) ** U) / D.size)
