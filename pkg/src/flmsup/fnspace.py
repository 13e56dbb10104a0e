"""Discretized L2([0, 1]) functions, trapezoid quadrature and data generators.

Functions live on a :class:`Grid` of abscissae in ``[0, 1]`` carrying
trapezoid weights, so that ``<f, g> = sum_k w_k f(t_k) g(t_k)``.  A
:class:`Dataset` stores the ``n`` regressor curves row-wise in a single
``(n, m)`` array; single curves are wrapped in :class:`FunctionalSample`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "Grid",
    "FunctionalSample",
    "Dataset",
    "GridMismatchError",
    "inner_product",
    "brownian_sample",
    "brownian_paths",
    "coefficient_function",
    "brownian_eigenvalue",
    "brownian_eigenelements",
    "brownian_kernel",
    "generate_dataset",
    "signal_variance",
    "snr_sigma",
]

CoefficientKind = Literal["rho0", "rho1", "rho2"]


class GridMismatchError(ValueError):
    """Raised when two functions are not sampled on the same grid."""


def trapezoid_weights(points: NDArray[np.float64]) -> NDArray[np.float64]:
    dt = np.diff(points)
    w = np.zeros_like(points)
    w[:-1] += dt / 2.0
    w[1:] += dt / 2.0
    return w


@dataclass(frozen=True, eq=False)
class Grid:
    """Abscissae on ``[0, 1]`` together with trapezoid quadrature weights."""

    points: NDArray[np.float64]
    weights: NDArray[np.float64] = field(repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least two points")
        if pts[0] != 0.0 or pts[-1] != 1.0:
            raise ValueError("grid must start at 0 and end at 1")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != pts.shape or not np.allclose(w, trapezoid_weights(pts), rtol=0, atol=1e-14):
            raise ValueError("weights must be the trapezoid weights of the points")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_points(cls, points) -> Grid:
        pts = np.asarray(points, dtype=float)
        return cls(pts, trapezoid_weights(pts))

    @classmethod
    def uniform(cls, m: int = 100) -> Grid:
        """Equispaced grid with ``m`` points, ``0`` and ``1`` included."""
        return cls.from_points(np.linspace(0.0, 1.0, m))

    def __len__(self) -> int:
        return self.points.size

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Grid):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    def __hash__(self) -> int:
        return hash(self.points.tobytes())

    @property
    def size(self) -> int:
        return self.points.size


@dataclass(frozen=True, eq=False)
class FunctionalSample:
    """A function sampled on a :class:`Grid`."""

    grid: Grid
    values: NDArray[np.float64]

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (len(self.grid),):
            raise ValueError(f"expected {len(self.grid)} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __call__(self, t):
        """Linear interpolation between grid points."""
        return np.interp(t, self.grid.points, self.values)

    def norm(self) -> float:
        return float(np.sqrt(inner_product(self, self)))


@dataclass(frozen=True, eq=False)
class Dataset:
    """``n`` observations ``(X_i, Y_i)``; ``X`` has shape ``(n, len(grid))``."""

    grid: Grid
    X: NDArray[np.float64]
    Y: NDArray[np.float64]

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        Y = np.array(self.Y, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.grid):
            raise ValueError(f"X must have shape (n, {len(self.grid)}), got {X.shape}")
        if Y.shape != (X.shape[0],):
            raise ValueError("Y must hold one response per curve")
        if Y.size < 2:
            raise ValueError("a dataset needs at least two observations")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("dataset contains non-finite values")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.Y.size

    def curve(self, i: int) -> FunctionalSample:
        return FunctionalSample(self.grid, self.X[i])

    def with_response(self, Y) -> Dataset:
        return Dataset(self.grid, self.X, Y)


def _check_same_grid(a: Grid, b: Grid):
    if a != b:
        raise GridMismatchError("functions live on different grids")


def inner_product(f: FunctionalSample, g: FunctionalSample) -> float:
    """Trapezoid approximation of ``int_0^1 f(t) g(t) dt``."""
    _check_same_grid(f.grid, g.grid)
    return float(np.sum(f.grid.weights * (f.values * g.values)))


def brownian_paths(grid: Grid, n: int, rng: np.random.Generator) -> NDArray[np.float64]:
    """``n`` standard Brownian paths on ``grid`` from exact Gaussian increments.

    Returns an array of shape ``(n, len(grid))`` whose first column is zero.
    """
    dt = np.diff(grid.points)
    steps = rng.standard_normal((n, dt.size)) * np.sqrt(dt)
    paths = np.zeros((n, len(grid)))
    np.cumsum(steps, axis=1, out=paths[:, 1:])
    return paths


def brownian_sample(grid: Grid, rng: np.random.Generator) -> FunctionalSample:
    return FunctionalSample(grid, brownian_paths(grid, 1, rng)[0])


def coefficient_function(kind: CoefficientKind, grid: Grid) -> FunctionalSample:
    """The slope functions used in the simulation design.

    ``rho0`` is identically zero, ``rho1`` is spanned by the first three
    Brownian eigenfunctions and ``rho2(t) = sin(2 pi t^3)^3`` is not spanned
    by any finite number of them.
    """
    t = grid.points
    if kind == "rho0":
        v = np.zeros_like(t)
    elif kind == "rho1":
        v = (np.sin(np.pi * t / 2) + 0.5 * np.sin(3 * np.pi * t / 2)
             + 0.25 * np.sin(5 * np.pi * t / 2))
    elif kind == "rho2":
        v = np.sin(2 * np.pi * t**3) ** 3
    else:
        raise ValueError(f"unknown coefficient function {kind!r}")
    return FunctionalSample(grid, v)


def brownian_eigenvalue(j):
    """``4 / ((2j - 1) pi)^2``; vectorized over ``j``."""
    j = np.asarray(j, dtype=float)
    if np.any(j < 1):
        raise ValueError("eigen-index starts at 1")
    return 4.0 / ((2.0 * j - 1.0) * np.pi) ** 2


def brownian_eigenelements(j: int, grid: Grid) -> tuple[float, FunctionalSample]:
    """``j``-th eigenpair of the Brownian covariance operator ``min(s, t)``."""
    if j < 1:
        raise ValueError("eigen-index starts at 1")
    lam = float(brownian_eigenvalue(j))
    e = np.sqrt(2.0) * np.sin((2 * j - 1) * np.pi * grid.points / 2)
    return lam, FunctionalSample(grid, e)


def brownian_kernel(grid: Grid) -> NDArray[np.float64]:
    """Covariance kernel ``min(s, t)`` evaluated on the grid."""
    return np.minimum.outer(grid.points, grid.points)


def signal_variance(rho: FunctionalSample) -> float:
    """``Var <X, rho>`` for Brownian ``X``: ``double integral of min(s,t) rho(s) rho(t)``."""
    wr = rho.grid.weights * rho.values
    return float(wr @ brownian_kernel(rho.grid) @ wr)


def snr_sigma(rho: FunctionalSample, snr: float) -> float:
    """Noise level giving the requested signal-to-noise ratio.

    ``sigma_eps^2 = (1 - snr) / snr * Var <X, rho>``.
    """
    if not 0.0 < snr < 1.0:
        raise ValueError("snr must lie in (0, 1)")
    v = signal_variance(rho)
    if v <= 0.0:
        raise ValueError("signal variance is zero; give sigma_eps explicitly")
    return float(np.sqrt((1.0 - snr) / snr * v))


def generate_dataset(
    n: int,
    rho: FunctionalSample,
    sigma_eps: float,
    rng: np.random.Generator,
) -> Dataset:
    """Brownian regressors with ``Y_i = <rho, X_i> + eps_i``, ``eps_i ~ N(0, sigma_eps^2)``."""
    if not np.isfinite(sigma_eps) or sigma_eps < 0:
        raise ValueError("sigma_eps must be finite and nonnegative")
    grid = rho.grid
    X = brownian_paths(grid, n, rng)
    Y = X @ (grid.weights * rho.values)
    if sigma_eps > 0:
        Y = Y + sigma_eps * rng.standard_normal(n)
    return Dataset(grid, X, Y)
