"""Behavior functions: the push-world surrogate task and closed-form landscapes.

Every behavior function maps a :class:`~evolvability.genotype.Genotype` to a
behavior vector and also exposes ``batch(weights)`` over a ``(m, P)`` array of
raw weight rows, which is what the walk and estimation loops call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from evolvability import kernels
from evolvability.genotype import Genotype, NetworkShape, ShapeError, decode


class ConfigurationError(ValueError):
    pass


class BehaviorFunction:
    shape: NetworkShape
    dim: int

    def __call__(self, g: Genotype) -> np.ndarray:
        if g.shape != self.shape:
            raise ConfigurationError(f"genotype shape {g.shape} does not match {self.shape}")
        return self.batch(g.weights[None, :])[0]

    def batch(self, weights: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class PointPushWorld:
    """Kinematic 2-D push task. A disc agent moves by ``step_size * action`` per
    step; touching the block pushes it out of overlap along the contact normal.
    Nothing here is random."""

    arena_lo: tuple[float, float] = (0.0, 0.0)
    arena_hi: tuple[float, float] = (1.0, 1.0)
    agent_start: tuple[float, float] = (0.2, 0.5)
    block_start: tuple[float, float] = (0.5, 0.5)
    agent_radius: float = 0.04
    block_radius: float = 0.06
    step_size: float = 0.02
    max_steps: int = 50

    def __post_init__(self):
        for name in ("arena_lo", "arena_hi", "agent_start", "block_start"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        lo, hi = np.array(self.arena_lo), np.array(self.arena_hi)
        if not np.all(hi > lo):
            raise ConfigurationError("arena upper bound must exceed lower bound")
        bs = np.array(self.block_start)
        if not (np.all(bs > lo) and np.all(bs < hi)):
            raise ConfigurationError("block must start strictly inside the arena")
        if self.agent_radius <= 0 or self.block_radius <= 0:
            raise ConfigurationError("radii must be positive")
        if self.step_size <= 0 or self.max_steps < 1:
            raise ConfigurationError("step_size must be positive and max_steps >= 1")

    def packed(self) -> np.ndarray:
        p = np.empty(kernels.WORLD_PARAM_COUNT)
        p[kernels.W_LO_X], p[kernels.W_LO_Y] = self.arena_lo
        p[kernels.W_HI_X], p[kernels.W_HI_Y] = self.arena_hi
        p[kernels.W_AGENT_X], p[kernels.W_AGENT_Y] = self.agent_start
        p[kernels.W_BLOCK_X], p[kernels.W_BLOCK_Y] = self.block_start
        p[kernels.W_AGENT_R] = self.agent_radius
        p[kernels.W_BLOCK_R] = self.block_radius
        p[kernels.W_STEP] = self.step_size
        return p


@dataclass
class EpisodeTrace:
    observations: list = field(default_factory=list)
    actions: list = field(default_factory=list)

    @property
    def step_count(self) -> int:
        return len(self.actions)


def _check_policy_shape(shape: NetworkShape):
    if shape.input_dim != kernels.OBS_DIM or shape.output_dim != kernels.ACT_DIM:
        raise ConfigurationError(
            f"push world needs {kernels.OBS_DIM} inputs and {kernels.ACT_DIM} outputs, "
            f"got {shape.input_dim} and {shape.output_dim}"
        )


def rollout(world: PointPushWorld, g: Genotype) -> tuple[np.ndarray, EpisodeTrace]:
    """Run one episode step by step, recording observations and actions.

    Returns the final block position and the trace.
    """
    _check_policy_shape(g.shape)
    policy = decode(g)
    lo, hi = world.arena_lo, world.arena_hi
    ax, ay = world.agent_start
    bx, by = world.block_start
    sx, sy = world.block_start
    reach = world.agent_radius + world.block_radius
    trace = EpisodeTrace()
    for _ in range(world.max_steps):
        obs = np.array([ax, ay, bx, by, ax - bx, ay - by, bx - sx, by - sy])
        act = policy(obs)
        trace.observations.append(obs)
        trace.actions.append(act)
        ax = min(max(ax + world.step_size * act[0], lo[0]), hi[0])
        ay = min(max(ay + world.step_size * act[1], lo[1]), hi[1])
        dx, dy = bx - ax, by - ay
        dist = math.sqrt(dx * dx + dy * dy)
        if dist < reach:
            nx, ny = (dx / dist, dy / dist) if dist > 0.0 else (1.0, 0.0)
            overlap = reach - dist
            bx = min(max(bx + nx * overlap, lo[0]), hi[0])
            by = min(max(by + ny * overlap, lo[1]), hi[1])
    return np.array([bx, by]), trace


class PushBehavior(BehaviorFunction):
    """Final block position after an episode in ``world``."""

    def __init__(self, world: PointPushWorld | None = None, hidden_dims=(32, 32)):
        self.world = world or PointPushWorld()
        self.shape = NetworkShape(kernels.OBS_DIM, tuple(hidden_dims), kernels.ACT_DIM)
        self.dim = 2
        self._packed = self.world.packed()
        self._dims = self.shape.dims_array()

    def batch(self, weights):
        weights = np.ascontiguousarray(weights, dtype=np.float64)
        if weights.ndim != 2 or weights.shape[1] != self.shape.parameter_count:
            raise ConfigurationError(
                f"expected (m, {self.shape.parameter_count}) weights, got {weights.shape}"
            )
        return kernels.rollout_batch(weights, self._dims, self._packed, self.world.max_steps)


class ConstantLandscape(BehaviorFunction):
    def __init__(self, shape: NetworkShape, value=(0.5, 0.5)):
        self.shape = shape
        self.value = np.asarray(value, dtype=np.float64)
        self.dim = self.value.size

    def batch(self, weights):
        return np.tile(self.value, (np.shape(weights)[0], 1))


class LinearLandscape(BehaviorFunction):
    """``phi(theta) = A @ theta + b``."""

    def __init__(self, shape: NetworkShape, A, b=None):
        self.shape = shape
        self.A = np.asarray(A, dtype=np.float64)
        if self.A.ndim != 2 or self.A.shape[1] != shape.parameter_count:
            raise ConfigurationError(f"A must be (d, {shape.parameter_count})")
        self.dim = self.A.shape[0]
        self.b = np.zeros(self.dim) if b is None else np.asarray(b, dtype=np.float64)

    @classmethod
    def identity(cls, shape: NetworkShape, dim: int = 2, offset=None):
        """Projection onto the first ``dim`` weights."""
        A = np.zeros((dim, shape.parameter_count))
        A[np.arange(dim), np.arange(dim)] = 1.0
        return cls(shape, A, offset)

    def batch(self, weights):
        return np.asarray(weights, dtype=np.float64) @ self.A.T + self.b


class SinusoidLandscape(BehaviorFunction):
    """``phi_j(theta) = sum_i sin(C[j, i] * theta_i)``."""

    def __init__(self, shape: NetworkShape, C):
        self.shape = shape
        self.C = np.asarray(C, dtype=np.float64)
        if self.C.ndim != 2 or self.C.shape[1] != shape.parameter_count:
            raise ConfigurationError(f"C must be (d, {shape.parameter_count})")
        self.dim = self.C.shape[0]

    @classmethod
    def random(cls, shape: NetworkShape, dim: int = 2, frequency: float = 3.0, seed=0):
        rng = np.random.default_rng(seed)
        return cls(shape, rng.normal(0.0, frequency, size=(dim, shape.parameter_count)))

    def batch(self, weights):
        w = np.asarray(weights, dtype=np.float64)
        return np.sin(w[:, None, :] * self.C[None, :, :]).sum(axis=-1)


_LANDSCAPES = {
    "constant": ConstantLandscape,
    "linear": LinearLandscape,
    "sinusoid": SinusoidLandscape,
}


def analytic_behavior(kind, g: Genotype, **params) -> np.ndarray:
    """Evaluate a closed-form landscape at ``g``.

    ``kind`` is either a landscape instance or one of ``"constant"``,
    ``"linear"`` (identity projection unless ``A`` is given) or ``"sinusoid"``.
    """
    if isinstance(kind, BehaviorFunction):
        return kind(g)
    if kind == "linear" and "A" not in params:
        return LinearLandscape.identity(g.shape, **params)(g)
    if kind == "sinusoid" and "C" not in params:
        return SinusoidLandscape.random(g.shape, **params)(g)
    try:
        cls = _LANDSCAPES[kind]
    except KeyError:
        raise ConfigurationError(f"unknown landscape {kind!r}") from None
    return cls(g.shape, **params)(g)


__all__ = [
    "BehaviorFunction",
    "ConfigurationError",
    "ConstantLandscape",
    "EpisodeTrace",
    "LinearLandscape",
    "PointPushWorld",
    "PushBehavior",
    "ShapeError",
    "SinusoidLandscape",
    "analytic_behavior",
    "rollout",
]
