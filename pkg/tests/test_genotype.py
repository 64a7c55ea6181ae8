import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evolvability.genotype import (
    Genotype,
    NetworkShape,
    ShapeError,
    decode,
    encode,
    forward,
    genotype_from_bytes,
    genotype_to_bytes,
    xavier_init,
)
from oracles import naive_forward


def test_25_input_architecture_parameter_count():
    # 26*32 + 33*32 + 33*4 by hand
    assert NetworkShape(25, (32, 32), 4).parameter_count == 2020


def test_xavier_biases_are_zero():
    shape = NetworkShape(1, (1,), 1)
    g = xavier_init(shape, 7)
    for _, bs, _, _ in shape.layer_slices():
        assert np.all(g.weights[bs] == 0.0)


def test_xavier_deterministic():
    shape = NetworkShape(8, (32, 32), 2)
    a, b = xavier_init(shape, 3), xavier_init(shape, 3)
    assert a.weights.tobytes() == b.weights.tobytes()
    assert xavier_init(shape, 4) != a


def test_xavier_variance_per_layer():
    shape = NetworkShape(200, (100,), 50)
    g = xavier_init(shape, 0)
    for ws, _, n_in, n_out in shape.layer_slices():
        var = g.weights[ws].var()
        assert var == pytest.approx(2.0 / (n_in + n_out), rel=0.05)


def test_zero_genotype_gives_zero_action():
    shape = NetworkShape(5, (6, 6), 3)
    g = Genotype(np.zeros(shape.parameter_count), shape)
    np.testing.assert_array_equal(forward(g, np.arange(5.0)), np.zeros(3))


def test_large_weight_saturates_output():
    shape = NetworkShape(1, (1,), 1)
    # w1, b1, w2, b2
    g = Genotype([1e3, 0.0, 1e3, 0.0], shape)
    assert forward(g, [1.0])[0] == pytest.approx(1.0, abs=1e-12)


def test_forward_matches_naive_oracle(rng):
    shape = NetworkShape(8, (32, 32), 2)
    for _ in range(20):
        w = rng.normal(size=shape.parameter_count)
        obs = rng.normal(size=8)
        got = forward(Genotype(w, shape), obs)
        np.testing.assert_allclose(got, naive_forward(w, shape.dims, obs), rtol=1e-12, atol=1e-15)


def test_forward_rejects_wrong_observation():
    shape = NetworkShape(3, (2,), 1)
    with pytest.raises(ShapeError):
        forward(xavier_init(shape, 0), np.zeros(4))


def test_genotype_length_checked():
    with pytest.raises(ShapeError):
        Genotype(np.zeros(5), NetworkShape(3, (2,), 1))


def test_genotype_rejects_non_finite():
    shape = NetworkShape(1, (1,), 1)
    with pytest.raises(ValueError):
        Genotype([0.0, np.inf, 0.0, 0.0], shape)


def test_genotype_is_immutable():
    g = xavier_init(NetworkShape(2, (2,), 2), 0)
    with pytest.raises(ValueError):
        g.weights[0] = 1.0


def test_decode_encode_roundtrip():
    shape = NetworkShape(4, (3, 5), 2)
    g = xavier_init(shape, 11)
    p = decode(g)
    assert [m.shape for m in p.matrices] == [(3, 4), (5, 3), (2, 5)]
    back = encode(p, shape)
    assert back == g
    p2 = decode(back)
    for a, b in zip(p.matrices + p.biases, p2.matrices + p2.biases):
        np.testing.assert_array_equal(a, b)


def test_bytes_roundtrip_little_endian():
    shape = NetworkShape(8, (32, 32), 2)
    g = xavier_init(shape, 5)
    blob = genotype_to_bytes(g)
    assert blob[:4] == b"EVG1"
    payload = np.frombuffer(blob[-8 * shape.parameter_count:], dtype="<f8")
    np.testing.assert_array_equal(payload, g.weights)
    assert genotype_from_bytes(blob) == g


dims = st.integers(min_value=1, max_value=8)


@settings(max_examples=60, deadline=None)
@given(inp=dims, hidden=st.lists(dims, min_size=0, max_size=3), out=dims, seed=st.integers(0, 2**32 - 1))
def test_parameter_count_matches_layout(inp, hidden, out, seed):
    shape = NetworkShape(inp, tuple(hidden), out)
    g = xavier_init(shape, seed)
    assert g.weights.size == shape.parameter_count
    assert sum(ws.stop - ws.start + bs.stop - bs.start for ws, bs, _, _ in shape.layer_slices()) == shape.parameter_count
    action = forward(g, np.random.default_rng(seed).normal(size=inp) * 100)
    assert np.max(np.abs(action)) <= 1.0
