"""Uniform grid discretisation of a bounded behavior space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NicheGrid:
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    cells_per_dim: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        object.__setattr__(self, "cells_per_dim", tuple(int(c) for c in self.cells_per_dim))
        if not (len(self.lo) == len(self.hi) == len(self.cells_per_dim)):
            raise ValueError("lo, hi and cells_per_dim must have equal length")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError("grid bounds must be increasing")
        if any(c < 1 for c in self.cells_per_dim) or self.n < 2:
            raise ValueError("grid needs at least 2 cells")

    @classmethod
    def square(cls, cells: int = 10, lo: float = 0.0, hi: float = 1.0, dim: int = 2):
        return cls((lo,) * dim, (hi,) * dim, (cells,) * dim)

    @property
    def n(self) -> int:
        return int(np.prod(self.cells_per_dim))

    @property
    def dim(self) -> int:
        return len(self.cells_per_dim)

    def cell_coords(self, behaviors) -> np.ndarray:
        """Integer cell coordinates; points outside the grid clamp to the edge cell."""
        b = np.atleast_2d(np.asarray(behaviors, dtype=np.float64))
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        cells = np.asarray(self.cells_per_dim)
        idx = np.floor((b - lo) / (hi - lo) * cells).astype(np.int64)
        return np.clip(idx, 0, cells - 1)

    def niche_of(self, behaviors) -> np.ndarray:
        """Flat row-major niche ids for a ``(m, d)`` array (or one vector)."""
        coords = self.cell_coords(behaviors)
        return np.ravel_multi_index(tuple(coords.T), self.cells_per_dim)

    def coords_of(self, niche: int) -> tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(int(niche), self.cells_per_dim))

    def to_dict(self):
        return {"lo": list(self.lo), "hi": list(self.hi), "cells_per_dim": list(self.cells_per_dim)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["lo"]), tuple(d["hi"]), tuple(d["cells_per_dim"]))
