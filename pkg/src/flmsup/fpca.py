"""Functional principal components: covariance, spectrum, truncation, slope fit."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from .fnspace import Dataset, FunctionalSample, Grid, GridMismatchError

__all__ = [
    "DegenerateCovarianceError",
    "EmptyTruncationError",
    "Eigensystem",
    "RegularizationScheme",
    "FpcaFit",
    "empirical_covariance",
    "eigensolve",
    "spectral_gaps",
    "truncation",
    "fit",
    "t_hat",
    "predict",
]


class DegenerateCovarianceError(ValueError):
    """No eigenvalue of the covariance exceeds the floor."""


class EmptyTruncationError(ValueError):
    """No index satisfies the truncation rule for the given threshold."""


def spectral_gaps(eigenvalues) -> NDArray[np.float64]:
    """Smallest distance from each eigenvalue to its neighbours.

    ``gap_1 = l_1 - l_2`` and ``gap_j = min(l_j - l_{j+1}, l_{j-1} - l_j)``.
    The last entry has no successor and uses only the backward gap; a
    single eigenvalue gets its distance to zero.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size == 1:
        return lam.copy()
    d = -np.diff(lam)
    gaps = np.empty_like(lam)
    gaps[0] = d[0]
    gaps[-1] = d[-1]
    if lam.size > 2:
        gaps[1:-1] = np.minimum(d[1:], d[:-1])
    return gaps


@dataclass(frozen=True, eq=False)
class Eigensystem:
    """Retained spectrum of a covariance operator, sorted decreasingly.

    Attributes
    ----------
    grid : Grid
    eigenvalues : ndarray, shape (p,)
    eigenfunctions : ndarray, shape (p, m)
        Row ``j`` holds ``e_j`` on the grid, unit norm in the quadrature
        inner product, with its largest-magnitude entry positive.
    gaps : ndarray, shape (p,)
    """

    grid: Grid
    eigenvalues: NDArray[np.float64]
    eigenfunctions: NDArray[np.float64]
    gaps: NDArray[np.float64]

    def __len__(self) -> int:
        return self.eigenvalues.size

    def eigenfunction(self, j: int) -> FunctionalSample:
        """``j``-th eigenfunction, 1-based like the eigenvalue index."""
        return FunctionalSample(self.grid, self.eigenfunctions[j - 1])

    def scores(self, X, k: int | None = None) -> NDArray[np.float64]:
        """Projections ``<X_i, e_j>`` as an ``(n, k)`` array."""
        E = self.eigenfunctions if k is None else self.eigenfunctions[:k]
        return np.asarray(X) @ (self.grid.weights[:, None] * E.T)

    @classmethod
    def from_arrays(cls, grid: Grid, eigenvalues, eigenfunctions) -> Eigensystem:
        lam = np.asarray(eigenvalues, dtype=float)
        return cls(grid, lam, np.asarray(eigenfunctions, dtype=float), spectral_gaps(lam))


def empirical_covariance(data: Dataset) -> NDArray[np.float64]:
    """``G[s, t] = (1/n) sum_i X_i(s) X_i(t)`` (uncentred, as in the model)."""
    G = data.X.T @ data.X / data.n
    return (G + G.T) / 2.0


def eigensolve(G, grid: Grid, floor: float | None = None) -> Eigensystem:
    """Eigenpairs of the integral operator with kernel ``G`` on ``grid``.

    The weighted problem ``sum_t G[s, t] w_t e(t) = l e(s)`` is symmetrized as
    ``W^(1/2) G W^(1/2)``; eigenvectors are mapped back by ``W^(-1/2)`` so they
    are orthonormal under the trapezoid inner product.

    Parameters
    ----------
    G : array_like, shape (m, m)
        Symmetric kernel sampled on the grid.
    grid : Grid
    floor : float, optional
        Eigenvalues ``<= floor`` are dropped.  Defaults to ``1e-12 * l_1``.
    """
    G = np.asarray(G, dtype=float)
    m = len(grid)
    if G.shape != (m, m):
        raise ValueError(f"kernel must be {m}x{m}")
    sw = np.sqrt(grid.weights)
    A = sw[:, None] * G * sw[None, :]
    lam, V = np.linalg.eigh((A + A.T) / 2.0)
    lam = lam[::-1]
    V = V[:, ::-1]
    top = lam[0]
    if floor is None:
        floor = 1e-12 * top if top > 0 else 0.0
    keep = lam > max(floor, 0.0)
    if not np.any(keep):
        raise DegenerateCovarianceError("degenerate covariance: no eigenvalue above the floor")
    lam = lam[keep]
    E = (V[:, keep] / sw[:, None]).T
    E /= np.sqrt(np.sum(grid.weights * E**2, axis=1))[:, None]
    peak = np.argmax(np.abs(E), axis=1)
    E *= np.sign(E[np.arange(E.shape[0]), peak])[:, None]

    close = -np.diff(lam) < 1e-10 * lam[0]
    if np.any(close):
        warnings.warn(
            f"{int(close.sum())} near-tied eigenvalue pair(s); eigenfunctions may be unstable",
            RuntimeWarning,
            stacklevel=2,
        )
    return Eigensystem(grid, lam, E, spectral_gaps(lam))


def truncation(eig: Eigensystem, c_n: float) -> int:
    """Largest ``p`` with ``l_p + gap_p / 2 >= c_n``."""
    ok = np.flatnonzero(eig.eigenvalues + eig.gaps / 2.0 >= c_n)
    if ok.size == 0:
        raise EmptyTruncationError(
            f"truncation empty: c_n = {c_n:.6g} exceeds l_1 + gap_1/2 = "
            f"{eig.eigenvalues[0] + eig.gaps[0] / 2:.6g}"
        )
    return int(ok[-1] + 1)


@dataclass(frozen=True)
class RegularizationScheme:
    """Approximate reciprocal ``f_n`` supported on ``[c_n, inf)``.

    ``simple``: ``f_n(x) = 1/x``; ``ridge``: ``f_n(x) = 1/(x + alpha_n)``.
    """

    kind: Literal["simple", "ridge"]
    c_n: float
    alpha_n: float = 0.0

    def __post_init__(self):
        if self.kind not in ("simple", "ridge"):
            raise ValueError(f"unknown regularization {self.kind!r}")
        if not self.c_n > 0:
            raise ValueError("c_n must be positive")
        if self.kind == "ridge" and not self.alpha_n > 0:
            raise ValueError("ridge regularization needs alpha_n > 0")
        if self.alpha_n < 0:
            raise ValueError("alpha_n must be nonnegative")

    def f_n(self, x, support=None):
        """Evaluate ``f_n`` at ``x``.

        ``support`` optionally replaces ``x`` in the threshold test
        ``x >= c_n``; this is how a known population spectrum decides which
        modes are kept while the weights use the empirical eigenvalues.
        """
        x = np.asarray(x, dtype=float)
        s = x if support is None else np.asarray(support, dtype=float)
        shift = self.alpha_n if self.kind == "ridge" else 0.0
        inside = s >= self.c_n
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(inside, 1.0 / (x + shift), 0.0)
        return out if out.ndim else float(out)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "c_n": self.c_n, "alpha_n": self.alpha_n}


@dataclass(frozen=True, eq=False)
class FpcaFit:
    """Truncated FPCA estimate of the slope.

    ``rho_coords[j] = <rho_hat, e_j>`` for the first ``k_hat`` empirical
    eigenfunctions and ``fvals[j] = f_n(l_j)`` the spectral weights used.
    """

    n: int
    k_hat: int
    rho_coords: NDArray[np.float64]
    fvals: NDArray[np.float64]
    eig: Eigensystem
    scheme: RegularizationScheme
    a_n: float
    sigma_eps: float
    sigma_estimated: bool = False

    def __post_init__(self):
        if not 1 <= self.k_hat <= len(self.eig):
            raise ValueError("k_hat must lie between 1 and the number of eigenvalues")
        if self.rho_coords.shape != (self.k_hat,) or not np.all(np.isfinite(self.rho_coords)):
            raise ValueError("rho_coords must be k_hat finite numbers")
        if not self.a_n > 0:
            raise ValueError("a_n must be positive")

    @property
    def grid(self) -> Grid:
        return self.eig.grid

    @property
    def eigenvalues(self) -> NDArray[np.float64]:
        """The ``k_hat`` leading eigenvalues."""
        return self.eig.eigenvalues[: self.k_hat]

    @property
    def psi(self) -> NDArray[np.float64]:
        """``sqrt(l_j) f_n(l_j)``, the standard-deviation weights."""
        return np.sqrt(self.eigenvalues) * self.fvals

    def slope(self) -> FunctionalSample:
        """``rho_hat(t) = sum_j rho_coords[j] e_j(t)``."""
        return FunctionalSample(self.grid, self.rho_coords @ self.eig.eigenfunctions[: self.k_hat])

    def to_dict(self) -> dict:
        k = self.k_hat
        return {
            "n": self.n,
            "k_hat": k,
            "grid": self.grid.points.tolist(),
            "eigenvalues": self.eig.eigenvalues[:k].tolist(),
            "eigenfunctions": self.eig.eigenfunctions[:k].tolist(),
            "rho_coords": self.rho_coords.tolist(),
            "fvals": self.fvals.tolist(),
            "scheme": self.scheme.to_dict(),
            "a_n": self.a_n,
            "sigma_eps": self.sigma_eps,
            "sigma_estimated": self.sigma_estimated,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> FpcaFit:
        grid = Grid.from_points(d["grid"])
        eig = Eigensystem.from_arrays(grid, d["eigenvalues"], d["eigenfunctions"])
        return cls(
            n=int(d["n"]),
            k_hat=int(d["k_hat"]),
            rho_coords=np.asarray(d["rho_coords"], dtype=float),
            fvals=np.asarray(d["fvals"], dtype=float),
            eig=eig,
            scheme=RegularizationScheme(**d["scheme"]),
            a_n=float(d["a_n"]),
            sigma_eps=float(d["sigma_eps"]),
            sigma_estimated=bool(d.get("sigma_estimated", False)),
        )


def fit(
    data: Dataset,
    scheme: RegularizationScheme,
    a_n: float,
    sigma_eps: float | Literal["estimate"] = "estimate",
    eig: Eigensystem | None = None,
    k: int | None = None,
    support=None,
) -> FpcaFit:
    """FPCA slope estimate ``rho_hat = f_n(Gamma_n) Delta_n``.

    Parameters
    ----------
    data : Dataset
    scheme : RegularizationScheme
    a_n : float
        Roughening added to the standard deviation.
    sigma_eps : float or "estimate"
        Known noise level, or ``"estimate"`` for the residual root mean square.
    eig : Eigensystem, optional
        Precomputed spectrum of the empirical covariance of ``data.X``.
    k : int, optional
        Truncation to use instead of the empirical rule.
    support : array_like, optional
        Values deciding the ``>= c_n`` cut for each of the ``k`` modes
        (e.g. known population eigenvalues); see :meth:`RegularizationScheme.f_n`.
    """
    if eig is None:
        eig = eigensolve(empirical_covariance(data), data.grid)
    elif eig.grid != data.grid:
        raise GridMismatchError("eigensystem and data use different grids")
    if k is None:
        k = truncation(eig, scheme.c_n)
    if not 1 <= k <= len(eig):
        raise ValueError(f"truncation {k} outside 1..{len(eig)}")
    lam = eig.eigenvalues[:k]
    fv = np.asarray(scheme.f_n(lam, None if support is None else np.asarray(support)[:k]), dtype=float)
    scores = eig.scores(data.X, k)
    delta = scores.T @ data.Y / data.n
    coords = fv * delta
    if isinstance(sigma_eps, str):
        if sigma_eps != "estimate":
            raise ValueError("sigma_eps must be a number or 'estimate'")
        resid = data.Y - scores @ coords
        sigma, estimated = float(np.sqrt(np.mean(resid**2))), True
    else:
        sigma, estimated = float(sigma_eps), False
    return FpcaFit(data.n, k, coords, fv, eig, scheme, float(a_n), sigma, estimated)


def t_hat(fit: FpcaFit, b) -> float:
    """Roughened standard deviation ``sqrt(sum_j l_j f_n(l_j)^2 b_j^2) + a_n``."""
    b = np.asarray(b, dtype=float)
    if b.shape != (fit.k_hat,):
        raise ValueError(f"expected {fit.k_hat} coordinates")
    return float(np.sqrt(np.sum(fit.eigenvalues * fit.fvals**2 * b**2)) + fit.a_n)


def predict(fit: FpcaFit, x: FunctionalSample) -> float:
    """``<rho_hat, x>``."""
    if x.grid != fit.grid:
        raise GridMismatchError("function and fit use different grids")
    proj = fit.eig.scores(x.values[None, :], fit.k_hat)[0]
    return float(proj @ fit.rho_coords)
