"""Truncated uniform grids on [-L, L] and complex-valued grid functions.

Fields carry homogeneous Dirichlet data at +-L: the grid stores only the
n interior nodes, so second-difference operators need no ghost handling.
All computations downstream certify that the quantities they transport
(vorticity, stream function) decay well inside the window, which is what
justifies the truncation in the first place.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform interior grid of n nodes on (-L, L), Dirichlet boundaries."""

    half_width: float
    n: int

    def __post_init__(self):
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")
        if self.n < 64:
            raise ValueError("grid too coarse: need n >= 64")

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / (self.n + 1)

    @property
    def nodes(self) -> np.ndarray:
        return -self.half_width + self.h * np.arange(1, self.n + 1)

    def refined(self, factor: int = 2) -> "Grid":
        """Grid with (roughly) factor-times finer spacing on the same window."""
        return Grid(self.half_width, (self.n + 1) * factor - 1)


@dataclass
class Field:
    """Complex grid function with discrete L2 / Linf / H1 norms."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.grid.n,):
            raise ValueError(f"field shape {v.shape} does not match grid n={self.grid.n}")
        self.values = v.astype(complex)

    @classmethod
    def from_callable(cls, grid: Grid, f) -> "Field":
        return cls(grid, np.asarray(f(grid.nodes), dtype=complex))

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.n, dtype=complex))

    def norm_l2(self) -> float:
        return float(np.sqrt(self.grid.h * np.sum(np.abs(self.values) ** 2)))

    def norm_linf(self) -> float:
        return float(np.max(np.abs(self.values)))

    def derivative_values(self) -> np.ndarray:
        """Centered first differences; one-sided Dirichlet closure at the ends."""
        v, h = self.values, self.grid.h
        d = np.empty_like(v)
        d[1:-1] = (v[2:] - v[:-2]) / (2 * h)
        # boundary values are zero just outside the window
        d[0] = v[1] / (2 * h)
        d[-1] = -v[-2] / (2 * h)
        return d

    def norm_h1(self) -> float:
        dv = self.derivative_values()
        h = self.grid.h
        return float(np.sqrt(h * np.sum(np.abs(self.values) ** 2) + h * np.sum(np.abs(dv) ** 2)))

    # small amount of arithmetic sugar used by the experiments
    def __add__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, a) -> "Field":
        return Field(self.grid, self.values * a)

    __rmul__ = __mul__

    def _check(self, other):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")
