"""Time the numba and numpy versions of every hot kernel on realistic inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--number 3]

Each kernel is called once before timing so numba compilation is excluded.
Both versions are also checked for agreement on the benchmark inputs.
"""

import argparse
import timeit

import numpy as np

from evolvability import kernels
from evolvability.environment import PointPushWorld
from evolvability.genotype import NetworkShape
from evolvability.markov import _cumulative


def _cases(rng):
    shape = NetworkShape(8, (32, 32), 2)
    weights = rng.normal(scale=0.3, size=(30, shape.parameter_count))
    world = PointPushWorld().packed()
    dims = shape.dims_array()
    cands = rng.uniform(size=(30, 2))
    archive = rng.uniform(size=(1200, 2))
    archive_w = np.ones(1200)
    t = rng.uniform(size=(100, 100))
    t /= t.sum(axis=1, keepdims=True)
    d = np.full(100, 0.01)
    absorbing = np.zeros(100, dtype=bool)
    uni = rng.uniform(size=(2000, 30, 3))
    return {
        "rollout_batch (30 x 50 steps)": ("rollout_batch", (weights, dims, world, 50)),
        "knn_scores (30 vs 1200)": ("knn_scores", (cands, archive, 15)),
        "kde_scores (30 vs 1200)": ("kde_scores", (cands, archive, archive_w, 0.5)),
        "pairwise_mean_max (30)": ("pairwise_mean_max", (cands,)),
        "chain_coverage (2000 x 30 x 3)": ("chain_coverage", (_cumulative(t), _cumulative(d)[0], absorbing, uni)),
    }


def _agree(a, b):
    if isinstance(a, tuple):
        return all(_agree(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-9, atol=1e-9)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--number", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':34s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}  agree")
    for label, (name, inputs) in _cases(rng).items():
        nb = getattr(kernels, f"_{name}_nb")
        npy = getattr(kernels, f"_{name}_np")
        ok = _agree(nb(*inputs), npy(*inputs))
        times = {}
        for tag, fn in (("nb", nb), ("np", npy)):
            best = min(timeit.repeat(lambda: fn(*inputs), repeat=args.repeat, number=args.number))
            times[tag] = 1e3 * best / args.number
        print(
            f"{label:34s} {times['nb']:10.3f} {times['np']:10.3f} "
            f"{times['np'] / times['nb']:7.1f}x  {'yes' if ok else 'NO'}"
        )


if __name__ == "__main__":
    main()
