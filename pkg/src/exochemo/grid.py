"""Uniform nodal grid on [0, 1] and the discrete calculus used everywhere.

All quadrature is composite trapezoid.  ``integrate`` and ``antiderivative``
share one cumulative sum, so ``antiderivative(f)[-1] == integrate(f)`` holds
bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import NonFiniteError

__all__ = [
    "Grid",
    "Field",
    "Norms",
    "integrate",
    "derivative",
    "antiderivative",
    "norms",
    "trapezoid_weights",
]


@dataclass(frozen=True)
class Grid:
    """Vertex-centred uniform mesh with ``n`` nodes, ``x[0] = 0`` and ``x[-1] = 1``."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"grid needs an integer node count n >= 3, got {self.n!r}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        # linspace pins both endpoints exactly
        return np.linspace(0.0, 1.0, self.n)

    def field(self, values) -> "Field":
        """Wrap an array or a callable of ``x`` as a Field on this grid."""
        if callable(values):
            values = values(self.x)
        return Field(self, values)

    def constant(self, c: float) -> "Field":
        return Field(self, np.full(self.n, float(c)))

    def zeros(self) -> "Field":
        return self.constant(0.0)

    def refine(self) -> "Grid":
        """Grid with half the spacing; every node of ``self`` is a node of the result."""
        return Grid(2 * self.n - 1)


@dataclass(frozen=True, eq=False)
class Field:
    """Nodal values of a function on ``grid``.  Values are copied and made read-only."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise NonFiniteError("field contains NaN or Inf")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.grid.n

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def _wrap(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._wrap(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._wrap(other))

    def __rsub__(self, other):
        return Field(self.grid, self._wrap(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._wrap(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field(self.grid, self.values / self._wrap(other))

    def __neg__(self):
        return Field(self.grid, -self.values)

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "Field":
        return Field(self.grid, fn(self.values))

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())


class Norms(NamedTuple):
    l2: float
    linf: float
    h1_semi: float


def trapezoid_weights(grid: Grid) -> np.ndarray:
    w = np.full(grid.n, grid.h)
    w[0] = w[-1] = 0.5 * grid.h
    return w


def _cumtrapz(values: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(values)
    out[0] = 0.0
    np.cumsum(0.5 * h * (values[:-1] + values[1:]), out=out[1:])
    return out


def integrate(f: Field) -> float:
    """Composite trapezoid approximation of the integral over [0, 1]."""
    return float(_cumtrapz(f.values, f.grid.h)[-1])


def antiderivative(f: Field) -> Field:
    """Cumulative trapezoid integral from x = 0; exactly zero at the left end."""
    return Field(f.grid, _cumtrapz(f.values, f.grid.h))


def derivative(f: Field) -> Field:
    """Second-order derivative: centred inside, one-sided three-point at the ends."""
    return Field(f.grid, np.gradient(f.values, f.grid.h, edge_order=2))


def norms(f: Field) -> Norms:
    l2 = np.sqrt(integrate(f * f))
    linf = float(np.max(np.abs(f.values)))
    fx = derivative(f)
    return Norms(float(l2), linf, float(np.sqrt(integrate(fx * fx))))
