"""Flat-vector genotypes and the feed-forward policies they encode.

Weight layout is fixed: layers in order; within a layer the ``(out, in)``
weight matrix in row-major order followed by the ``out`` biases. Hidden layers
use ReLU, the output layer uses tanh so every action lies in ``[-1, 1]``.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

_MAGIC = b"EVG1"


class ShapeError(ValueError):
    """Raised when an input or genotype does not match a network shape."""


@dataclass(frozen=True)
class NetworkShape:
    input_dim: int
    hidden_dims: tuple[int, ...]
    output_dim: int

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if any(d < 1 for d in self.dims):
            raise ShapeError(f"all layer sizes must be >= 1, got {self.dims}")

    @property
    def dims(self) -> tuple[int, ...]:
        return (int(self.input_dim), *self.hidden_dims, int(self.output_dim))

    @property
    def parameter_count(self) -> int:
        d = self.dims
        return sum((d[i] + 1) * d[i + 1] for i in range(len(d) - 1))

    def layer_slices(self):
        """Yield ``(weight_slice, bias_slice, n_in, n_out)`` for each layer."""
        off = 0
        d = self.dims
        for n_in, n_out in zip(d[:-1], d[1:]):
            w = slice(off, off + n_in * n_out)
            off += n_in * n_out
            b = slice(off, off + n_out)
            off += n_out
            yield w, b, n_in, n_out

    def dims_array(self) -> np.ndarray:
        return np.asarray(self.dims, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class Genotype:
    """A point in weight space. The weight array is stored read-only."""

    weights: np.ndarray
    shape: NetworkShape = field(repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True).ravel()
        if w.size != self.shape.parameter_count:
            raise ShapeError(
                f"genotype has {w.size} weights, shape needs {self.shape.parameter_count}"
            )
        if not np.all(np.isfinite(w)):
            raise ValueError("genotype weights must be finite")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def __eq__(self, other):
        if not isinstance(other, Genotype):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash((self.shape, self.weights.tobytes()))

    def digest(self) -> str:
        return genotype_digest(self)


@dataclass(frozen=True)
class Policy:
    """Decoded per-layer matrices ``W`` of shape ``(out, in)`` and biases ``b``."""

    matrices: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __call__(self, observation):
        x = np.asarray(observation, dtype=np.float64)
        if x.shape != (self.matrices[0].shape[1],):
            raise ShapeError(
                f"observation has shape {x.shape}, expected ({self.matrices[0].shape[1]},)"
            )
        last = len(self.matrices) - 1
        for i, (W, b) in enumerate(zip(self.matrices, self.biases)):
            x = W @ x + b
            x = np.tanh(x) if i == last else np.maximum(x, 0.0)
        return x


def xavier_init(shape: NetworkShape, seed) -> Genotype:
    """Xavier-normal weights, zero biases.

    Each layer's weights are drawn from ``Normal(0, 2 / (fan_in + fan_out))``
    from a single generator in layer order, so a seed fixes the genotype.
    """
    rng = np.random.default_rng(seed)
    w = np.zeros(shape.parameter_count)
    for ws, _, n_in, n_out in shape.layer_slices():
        std = np.sqrt(2.0 / (n_in + n_out))
        w[ws] = rng.normal(0.0, std, size=n_in * n_out)
    return Genotype(w, shape)


def decode(g: Genotype) -> Policy:
    mats, biases = [], []
    for ws, bs, n_in, n_out in g.shape.layer_slices():
        mats.append(g.weights[ws].reshape(n_out, n_in))
        biases.append(g.weights[bs])
    return Policy(tuple(mats), tuple(biases))


def encode(policy: Policy, shape: NetworkShape) -> Genotype:
    parts = []
    for W, b in zip(policy.matrices, policy.biases):
        parts.append(np.asarray(W, dtype=np.float64).ravel())
        parts.append(np.asarray(b, dtype=np.float64).ravel())
    return Genotype(np.concatenate(parts), shape)


def forward(g: Genotype, observation) -> np.ndarray:
    return decode(g)(observation)


def genotype_to_bytes(g: Genotype) -> bytes:
    """Shape descriptor followed by little-endian float64 weights."""
    dims = g.shape.dims
    head = _MAGIC + struct.pack(f"<I{len(dims)}I", len(dims), *dims)
    return head + g.weights.astype("<f8").tobytes()


def genotype_from_bytes(blob: bytes) -> Genotype:
    if blob[:4] != _MAGIC:
        raise ValueError("not a serialized genotype")
    (n,) = struct.unpack_from("<I", blob, 4)
    dims = struct.unpack_from(f"<{n}I", blob, 8)
    shape = NetworkShape(dims[0], tuple(dims[1:-1]), dims[-1])
    start = 8 + 4 * n
    weights = np.frombuffer(blob, dtype="<f8", offset=start)
    if weights.size != shape.parameter_count:
        raise ValueError("truncated genotype payload")
    return Genotype(weights.astype(np.float64), shape)


def genotype_digest(g: Genotype) -> str:
    return hashlib.sha256(genotype_to_bytes(g)).hexdigest()[:16]


def shape_from_sequence(dims: Sequence[int]) -> NetworkShape:
    dims = [int(d) for d in dims]
    if len(dims) < 2:
        raise ShapeError("a network needs at least input and output sizes")
    return NetworkShape(dims[0], tuple(dims[1:-1]), dims[-1])
