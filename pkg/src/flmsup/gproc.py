"""Monte Carlo for the supremum of the limiting Gaussian process.

The process is indexed by coordinate vectors ``x`` in the unit ball of
``R^K`` and has covariance

    c(x, y) = sum_j w_j x_j y_j / ((|x|_w + a_n) (|y|_w + a_n)),

with ``w_j = lambda_j f_n(lambda_j)^2`` and ``|x|_w^2 = sum_j w_j x_j^2``.
The supremum is approximated by the maximum over a fixed finite set of
index points; quantiles of ``max / beta_n`` are the test's critical values.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy import linalg

__all__ = [
    "KernelNotPSDError",
    "GpKernel",
    "SupSimResult",
    "kernel_eval",
    "covariance_matrix",
    "sample_index_points",
    "factorize",
    "simulate_sup",
    "quantile",
]

JITTERS = (1e-10, 1e-8, 1e-6)
BATCH = 2048


class KernelNotPSDError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class GpKernel:
    lam: NDArray[np.float64]
    fvals: NDArray[np.float64]
    a_n: float

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        fv = np.atleast_1d(np.asarray(self.fvals, dtype=float))
        if lam.shape != fv.shape or lam.ndim != 1:
            raise ValueError("lam and fvals must be vectors of equal length")
        if np.any(lam <= 0) or np.any(fv < 0) or not self.a_n > 0:
            raise ValueError("need lam > 0, fvals >= 0 and a_n > 0")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "fvals", fv)

    @property
    def K(self) -> int:
        return self.lam.size

    @property
    def weights(self) -> NDArray[np.float64]:
        return self.lam * self.fvals**2

    def to_dict(self) -> dict:
        return {"lam": self.lam.tolist(), "fvals": self.fvals.tolist(), "a_n": self.a_n}


def kernel_eval(k: GpKernel, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = k.weights
    nx = np.sqrt(np.sum(w * x * x)) + k.a_n
    ny = np.sqrt(np.sum(w * y * y)) + k.a_n
    return float(np.sum(w * (x * y)) / (nx * ny))


def covariance_matrix(k: GpKernel, points) -> NDArray[np.float64]:
    """``C[i, j] = kernel_eval(k, points[i], points[j])`` for all pairs."""
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[1] != k.K:
        raise ValueError(f"points must have shape (m, {k.K})")
    A = P * np.sqrt(k.weights)
    A /= (np.linalg.norm(A, axis=1) + k.a_n)[:, None]
    C = A @ A.T
    return (C + C.T) / 2.0


def sample_index_points(
    K: int, n_boundary: int, n_interior: int, rng: np.random.Generator
) -> NDArray[np.float64]:
    """Uniform points on the unit sphere of ``R^K`` followed by uniform points in the ball.

    Returns an array of shape ``(n_boundary + n_interior, K)``.
    """
    if K < 1 or n_boundary < 1 or n_interior < 1:
        raise ValueError("counts must be >= 1")

    def sphere(m):
        z = rng.standard_normal((m, K))
        nrm = np.linalg.norm(z, axis=1)
        while np.any(nrm == 0):  # pragma: no cover - probability zero
            bad = nrm == 0
            z[bad] = rng.standard_normal((int(bad.sum()), K))
            nrm = np.linalg.norm(z, axis=1)
        return z / nrm[:, None]

    bnd = sphere(n_boundary)
    inner = sphere(n_interior) * rng.uniform(size=(n_interior, 1)) ** (1.0 / K)
    return np.vstack([bnd, inner])


def factorize(C) -> tuple[NDArray[np.float64], float]:
    """Square root ``L`` with ``L L^T ~= C``.

    Tries a Cholesky factorization with jitter ``1e-10, 1e-8, 1e-6`` on the
    diagonal and falls back to an eigendecomposition with negative
    eigenvalues clipped to zero.  Returns the factor and the jitter used
    (``nan`` for the eigen fallback).
    """
    C = np.asarray(C, dtype=float)
    eye = np.eye(C.shape[0])
    for jit in JITTERS:
        try:
            return linalg.cholesky(C + jit * eye, lower=True), jit
        except linalg.LinAlgError:
            continue
    vals, vecs = np.linalg.eigh(C)
    if vals.min() < -1e-6 * max(1.0, vals.max()):
        raise KernelNotPSDError("kernel not PSD")
    return vecs * np.sqrt(np.clip(vals, 0.0, None)), float("nan")


@dataclass(frozen=True, eq=False)
class SupSimResult:
    """Sorted simulated maxima (before division by ``beta_n``)."""

    samples: NDArray[np.float64]
    reps: int
    seed: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float))
        if not np.all(np.isfinite(s)):
            raise ValueError("simulated maxima must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def to_dict(self) -> dict:
        return {"reps": self.reps, "seed": self.seed, "meta": self.meta,
                "samples": self.samples.tolist()}

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> SupSimResult:
        with open(path) as fh:
            d = json.load(fh)
        return cls(np.asarray(d["samples"]), int(d["reps"]), d.get("seed"), d.get("meta", {}))


def _as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(seed.integers(0, 2**63, size=4).tolist())
    return np.random.SeedSequence(seed)


def simulate_sup(
    k: GpKernel,
    points,
    reps: int,
    seed=None,
    threads: int = 1,
) -> SupSimResult:
    """Simulate ``max_i G(points[i])`` ``reps`` times.

    Paths are drawn in fixed-size batches, each with its own child seed, so
    the sorted output does not depend on ``threads``.
    """
    P = np.asarray(points, dtype=float)
    if P.shape[0] < 2 or reps < 1:
        raise ValueError("need at least two index points and one repetition")
    L, jitter = factorize(covariance_matrix(k, P))
    ss = _as_seed_sequence(seed)
    n_batches = math.ceil(reps / BATCH)
    children = ss.spawn(n_batches)
    sizes = [min(BATCH, reps - i * BATCH) for i in range(n_batches)]

    def run(i):
        z = np.random.default_rng(children[i]).standard_normal((L.shape[1], sizes[i]))
        return (L @ z).max(axis=0)

    if threads > 1 and n_batches > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(run, range(n_batches)))
    else:
        parts = [run(i) for i in range(n_batches)]
    entropy = ss.entropy if isinstance(ss.entropy, int) else list(ss.entropy)
    return SupSimResult(
        np.concatenate(parts), reps, seed=entropy,
        meta={"points": int(P.shape[0]), "K": k.K, "jitter": jitter},
    )


def quantile(result: SupSimResult, beta_n: float, alpha: float) -> float:
    """Nearest-rank ``(1 - alpha)`` quantile of ``samples / beta_n``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if not beta_n > 0:
        raise ValueError("beta_n must be positive")
    N = result.samples.size
    if N == 0:
        raise ValueError("no simulated samples")
    rank = max(1, math.ceil((1.0 - alpha) * N - 1e-9))
    return float(result.samples[rank - 1] / beta_n)
