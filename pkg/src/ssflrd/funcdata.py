"""Curves sampled on a uniform grid of [0, 1] and their G / H inner products.

The quadrature is the left-endpoint rectangular rule: ``t_j = (j - 1) / p``
with weight ``1 / p``, so the grid never contains ``t = 1``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, GridError, NumericError

__all__ = [
    "Grid",
    "FunctionalCurve",
    "make_grid",
    "numeric_derivative",
    "derivative_matrix",
    "inner_g",
    "inner_h",
    "gram_g",
    "gram_h",
]


@dataclass(frozen=True)
class Grid:
    """Uniform left-rectangular grid with ``p`` points on [0, 1)."""

    p: int

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 3:
            raise GridError(f"grid needs an integer p >= 3, got {self.p!r}")
        object.__setattr__(self, "p", int(self.p))

    @property
    def dt(self) -> float:
        return 1.0 / self.p

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.p) / self.p


def make_grid(p: int = 366) -> Grid:
    """Return the ``p``-point rectangular grid (default 366 as in daily data)."""
    return Grid(p)


def numeric_derivative(values, grid: Grid) -> np.ndarray:
    """Second-order finite-difference derivative of grid samples.

    Central differences at interior points and three-point one-sided
    stencils at both ends; exact for polynomials of degree <= 2.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != grid.p:
        raise DimensionError(f"expected {grid.p} samples, got {values.shape[-1]}")
    if not np.all(np.isfinite(values)):
        raise NumericError("non-finite curve samples cannot be differentiated")
    return np.gradient(values, grid.dt, axis=-1, edge_order=2)


def derivative_matrix(grid: Grid) -> np.ndarray:
    """Dense ``p x p`` matrix of the stencil used by :func:`numeric_derivative`."""
    return numeric_derivative(np.eye(grid.p), grid).T


@dataclass(frozen=True, eq=False)
class FunctionalCurve:
    """Immutable curve: samples of ``x`` and of ``x'`` on a shared grid."""

    grid: Grid
    values: np.ndarray
    deriv: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.p,):
            raise DimensionError(f"values must have length {self.grid.p}, got shape {values.shape}")
        if self.deriv is None:
            deriv = numeric_derivative(values, self.grid)
        else:
            deriv = np.array(self.deriv, dtype=float)
            if deriv.shape != (self.grid.p,):
                raise DimensionError(f"deriv must have length {self.grid.p}, got shape {deriv.shape}")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(deriv))):
            raise NumericError("curve samples must be finite")
        values.setflags(write=False)
        deriv.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "deriv", deriv)

    @classmethod
    def from_values(cls, values, grid: Grid) -> "FunctionalCurve":
        """Build a curve whose derivative comes from finite differences."""
        return cls(grid, values, None)

    @classmethod
    def zeros(cls, grid: Grid) -> "FunctionalCurve":
        z = np.zeros(grid.p)
        return cls(grid, z, z)

    def derivative_curve(self) -> "FunctionalCurve":
        """``x'`` as a curve in G (its own derivative is not needed)."""
        return FunctionalCurve(self.grid, self.deriv, np.zeros(self.grid.p))

    def __add__(self, other):
        _check_same_grid(self, other)
        return FunctionalCurve(self.grid, self.values + other.values, self.deriv + other.deriv)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return FunctionalCurve(self.grid, self.values - other.values, self.deriv - other.deriv)

    def __mul__(self, scalar):
        scalar = float(scalar)
        return FunctionalCurve(self.grid, scalar * self.values, scalar * self.deriv)

    __rmul__ = __mul__


def _check_same_grid(f, g):
    if f.grid != g.grid:
        raise DimensionError(f"curves live on different grids (p={f.grid.p} vs p={g.grid.p})")


def inner_g(f: FunctionalCurve, g: FunctionalCurve) -> float:
    """``<f, g>_G``: rectangular quadrature of ``f * g``."""
    _check_same_grid(f, g)
    return float(f.grid.dt * np.dot(f.values, g.values))


def inner_h(f: FunctionalCurve, g: FunctionalCurve) -> float:
    """``<f, g>_H = <f, g>_G + <f', g'>_G`` using the stored derivatives."""
    _check_same_grid(f, g)
    return float(f.grid.dt * (np.dot(f.values, g.values) + np.dot(f.deriv, g.deriv)))


def gram_g(grid: Grid) -> np.ndarray:
    """Metric matrix of G on grid samples."""
    return grid.dt * np.eye(grid.p)


def gram_h(grid: Grid) -> np.ndarray:
    """Metric matrix of H on grid samples, ``dt * (I + D^T D)``."""
    D = derivative_matrix(grid)
    return grid.dt * (np.eye(grid.p) + D.T @ D)
