import numpy as np
import pytest

from evolvability._seeding import substream
from evolvability.environment import LinearLandscape
from evolvability.genotype import NetworkShape, xavier_init
from evolvability.variation import MutationConfig, mutate, perturbation, sample_neighbors

SHAPE = NetworkShape(8, (32, 32), 2)


def test_tiny_scale_leaves_parent_unchanged():
    g = xavier_init(SHAPE, 0)
    child = mutate(g, MutationConfig(scale=1e-30), 1)
    np.testing.assert_allclose(child.weights, g.weights, rtol=0, atol=1e-20)


def test_mutate_deterministic():
    g = xavier_init(SHAPE, 0)
    cfg = MutationConfig(scale=0.1)
    assert mutate(g, cfg, 42) == mutate(g, cfg, 42)
    assert mutate(g, cfg, 42) != mutate(g, cfg, 43)


def test_cauchy_half_mass_beyond_one():
    # standard Cauchy quartiles are +-1, so P(|c| > 1) = 1/2
    c = perturbation(100_000, MutationConfig(scale=1.0), np.random.default_rng(0))
    assert np.mean(np.abs(c) > 1.0) == pytest.approx(0.5, abs=0.01)
    assert 0.9 <= np.median(np.abs(c)) <= 1.1


def test_per_weight_probability_masks():
    c = perturbation(100_000, MutationConfig(scale=1.0, per_weight_prob=0.3), np.random.default_rng(1))
    assert np.mean(c != 0.0) == pytest.approx(0.3, abs=0.01)


def test_non_finite_draws_resampled():
    # scale so large that a fraction of products overflow to inf
    g = xavier_init(NetworkShape(2, (2,), 1), 0)
    child = mutate(g, MutationConfig(scale=1e307), 0)
    assert np.all(np.isfinite(child.weights))


@pytest.mark.parametrize(
    "kwargs", [{"scale": 0.0}, {"per_weight_prob": 0.0}, {"per_weight_prob": 1.5}, {"offspring_count": 1}]
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        MutationConfig(**kwargs)


def test_offspring_set_size_default_thirty(push):
    off = sample_neighbors(xavier_init(SHAPE, 0), MutationConfig(), push, 0)
    assert len(off) == 30
    assert off.behaviors.shape == (30, 2)
    assert len(off.children) == 30


def test_children_independent_of_evaluation_order():
    g = xavier_init(SHAPE, 3)
    cfg = MutationConfig(scale=0.2, offspring_count=12)
    phi = LinearLandscape.identity(SHAPE)
    off = sample_neighbors(g, cfg, phi, 99)
    for i in reversed(range(cfg.offspring_count)):
        child = mutate(g, cfg, substream(99, i))
        np.testing.assert_array_equal(child.weights, off.weights[i])
        np.testing.assert_array_equal(phi(child), off.behaviors[i])


def test_children_evaluated_with_parent_function(push):
    g = xavier_init(SHAPE, 5)
    off = sample_neighbors(g, MutationConfig(scale=0.5, offspring_count=5), push, 2)
    for i in range(len(off)):
        np.testing.assert_array_equal(push(off.child(i)), off.behaviors[i])
