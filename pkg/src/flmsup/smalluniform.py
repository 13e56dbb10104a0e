"""The small-uniform statistic as a fractional program over the unit ball.

For coordinates ``b`` in the span of the leading eigenfunctions the
objective is

    L(b) = <theta, b> / (sqrt(sum_j psi_j^2 b_j^2) + a_n)

and the statistic is ``sqrt(n) / (sigma * beta_n) * max_{|b| <= 1} L(b)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from scipy import optimize

from .fpca import FpcaFit

__all__ = [
    "FractionalObjective",
    "OptimizerConfig",
    "OptimizerReport",
    "objective",
    "gradient",
    "hessian",
    "to_cartesian",
    "maximize",
    "small_uniform_statistic",
]


@dataclass(frozen=True, eq=False)
class FractionalObjective:
    theta: NDArray[np.float64]
    psi: NDArray[np.float64]
    a_n: float

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        psi = np.atleast_1d(np.asarray(self.psi, dtype=float))
        if theta.ndim != 1 or theta.shape != psi.shape or theta.size == 0:
            raise ValueError("theta and psi must be nonempty vectors of equal length")
        if np.any(psi <= 0):
            raise ValueError("psi must be strictly positive")
        if not self.a_n > 0:
            raise ValueError("a_n must be positive")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "psi", psi)

    @property
    def k(self) -> int:
        return self.theta.size


@dataclass(frozen=True)
class OptimizerConfig:
    """Multistart settings.

    ``method="cartesian"`` runs projected gradient ascent on the ball;
    ``method="spherical"`` runs box-constrained L-BFGS-B in ``(r, angles)``.
    """

    starts: int = 16
    max_iters: int = 500
    grad_tol: float = 1e-6
    method: Literal["cartesian", "spherical"] = "cartesian"

    def __post_init__(self):
        if self.starts < 1 or self.max_iters < 1 or not self.grad_tol > 0:
            raise ValueError("starts and max_iters must be >= 1 and grad_tol > 0")
        if self.method not in ("cartesian", "spherical"):
            raise ValueError(f"unknown optimizer method {self.method!r}")


@dataclass(frozen=True)
class OptimizerReport:
    best_value: float
    best_point: NDArray[np.float64]
    starts: int
    converged_starts: int
    max_gradient_norm_at_best: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["best_point"] = np.asarray(self.best_point).tolist()
        return d


def _parts(obj: FractionalObjective, b):
    b = np.asarray(b, dtype=float)
    if b.shape != obj.theta.shape:
        raise ValueError(f"expected {obj.k} coordinates, got shape {b.shape}")
    f = float(obj.theta @ b)
    p = float(np.sum(obj.psi**2 * b**2))
    return b, f, p


def objective(obj: FractionalObjective, b) -> float:
    b, f, p = _parts(obj, b)
    return f / (np.sqrt(p) + obj.a_n)


def gradient(obj: FractionalObjective, b) -> NDArray[np.float64]:
    """``dL/db_l = (theta_l - b_l psi_l^2 f / (g sqrt(p))) / g``."""
    b, f, p = _parts(obj, b)
    if p <= 0:
        raise ValueError("gradient undefined at origin")
    s = np.sqrt(p)
    g = s + obj.a_n
    return (obj.theta - b * obj.psi**2 * f / (g * s)) / g


def hessian(obj: FractionalObjective, b) -> NDArray[np.float64]:
    """Second derivatives of ``L``; symmetric by construction.

    Writing ``q_l = b_l psi_l^2`` and ``A_l = theta_l - q_l f / (g s)``,

        H[l, l'] = ( -psi_l^2 f / s * [l == l']
                     - q_l (theta_l' / s - f q_l' (g + s) / (g s^3))
                     - A_l q_l' / s ) / g^2
    """
    b, f, p = _parts(obj, b)
    if p <= 0:
        raise ValueError("hessian undefined at origin")
    s = np.sqrt(p)
    g = s + obj.a_n
    q = b * obj.psi**2
    A = obj.theta - q * f / (g * s)
    H = -np.outer(q, obj.theta / s - f * q * (g + s) / (g * s**3))
    H -= np.outer(A, q) / s
    H[np.diag_indices_from(H)] -= obj.psi**2 * f / s
    H /= g**2
    return (H + H.T) / 2.0


def _unit_from(sins, coss) -> NDArray[np.float64]:
    k = sins.size + 1
    u = np.empty(k)
    prod = 1.0
    for i in range(k - 1):
        u[i] = prod * coss[i]
        prod *= sins[i]
    u[k - 1] = prod
    return u


def to_cartesian(r: float, phi) -> NDArray[np.float64]:
    """Spherical to Euclidean coordinates in ``len(phi) + 1`` dimensions.

    ``b_1 = r cos(phi_1)``, ``b_i = r sin(phi_1)...sin(phi_{i-1}) cos(phi_i)``
    and the last coordinate closes with ``sin(phi_{k-1})``.
    """
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    return r * _unit_from(np.sin(phi), np.cos(phi))


def _cartesian_jacobian(r: float, phi) -> NDArray[np.float64]:
    """``d b / d (r, phi)`` as a ``(k, k)`` matrix."""
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    s, c = np.sin(phi), np.cos(phi)
    k = phi.size + 1
    J = np.empty((k, k))
    J[:, 0] = _unit_from(s, c)
    for m in range(k - 1):
        # d/dphi_m maps sin -> cos and cos -> -sin in slot m; earlier coordinates do not depend on it
        ds, dc = s.copy(), c.copy()
        ds[m], dc[m] = c[m], -s[m]
        col = _unit_from(ds, dc)
        col[:m] = 0.0
        J[:, m + 1] = r * col
    return J


def _project(b):
    nrm = np.linalg.norm(b)
    return b / nrm if nrm > 1.0 else b


def _projected_gradient_norm(b, gr) -> float:
    return float(np.linalg.norm(_project(b + gr) - b))


def _start_points(obj: FractionalObjective, n_starts: int, rng: np.random.Generator):
    k = obj.k
    pts = []
    tnorm = np.linalg.norm(obj.theta)
    if tnorm > 0:
        pts.append(obj.theta / tnorm)
    while len(pts) < n_starts:
        z = rng.standard_normal(k)
        z /= np.linalg.norm(z)
        if len(pts) % 2 == 1:
            z *= rng.uniform() ** (1.0 / k)
        if np.linalg.norm(z) > 1e-8:
            pts.append(z)
    return pts[:n_starts]


def _ascend_cartesian(obj: FractionalObjective, b0, cfg: OptimizerConfig):
    """Spectral projected gradient ascent with Armijo backtracking."""
    b = _project(np.asarray(b0, dtype=float))
    val = objective(obj, b)
    gr = gradient(obj, b)
    step = 1.0
    for _ in range(cfg.max_iters):
        if _projected_gradient_norm(b, gr) < cfg.grad_tol:
            return b, val, gr, True
        t = step
        while True:
            trial = _project(b + t * gr)
            if np.linalg.norm(trial) > 1e-12:
                tval = objective(obj, trial)
                if tval >= val + 1e-4 * float(gr @ (trial - b)):
                    break
            t *= 0.5
            if t < 1e-16:
                return b, val, gr, False
        tgr = gradient(obj, trial)
        s_vec = trial - b
        curv = -float(s_vec @ (tgr - gr))
        step = float(s_vec @ s_vec) / curv if curv > 1e-300 else 2.0 * t
        step = min(max(step, 1e-10), 1e10)
        if tval - val <= 1e-15 * max(1.0, abs(val)) and np.allclose(trial, b, rtol=0, atol=1e-15):
            b, val, gr = trial, tval, tgr
            return b, val, gr, _projected_gradient_norm(b, gr) < cfg.grad_tol
        b, val, gr = trial, tval, tgr
    return b, val, gr, _projected_gradient_norm(b, gr) < cfg.grad_tol


def _ascend_spherical(obj: FractionalObjective, b0, cfg: OptimizerConfig):
    """L-BFGS-B over the box ``r in [0, 1]``, angles in ``[0, pi]`` / ``[0, 2 pi]``."""
    k = obj.k
    b0 = _project(np.asarray(b0, dtype=float))
    if k == 1:
        bounds = [(-1.0, 1.0)]
        x0 = b0.copy()

        def unpack(x):
            return np.asarray(x, dtype=float), np.eye(1)
    else:
        bounds = [(1e-9, 1.0)] + [(0.0, np.pi)] * (k - 2) + [(0.0, 2 * np.pi)]
        x0 = _to_spherical(b0)

        def unpack(x):
            return to_cartesian(x[0], x[1:]), _cartesian_jacobian(x[0], x[1:])

    def neg(x):
        b, J = unpack(x)
        if np.linalg.norm(b) < 1e-12:
            return 0.0, np.zeros_like(x)
        return -objective(obj, b), -(J.T @ gradient(obj, b))

    res = optimize.minimize(
        neg, x0, jac=True, method="L-BFGS-B", bounds=bounds,
        options={"maxiter": cfg.max_iters, "gtol": cfg.grad_tol, "ftol": 1e-15},
    )
    b = _project(unpack(res.x)[0])
    if np.linalg.norm(b) < 1e-12:
        return b, 0.0, np.zeros(k), bool(res.success)
    gr = gradient(obj, b)
    return b, objective(obj, b), gr, _projected_gradient_norm(b, gr) < cfg.grad_tol or bool(res.success)


def _to_spherical(b) -> NDArray[np.float64]:
    k = b.size
    r = np.linalg.norm(b)
    phi = np.zeros(k - 1)
    if r == 0:
        return np.concatenate([[1e-9], phi])
    for i in range(k - 2):
        phi[i] = np.arctan2(np.linalg.norm(b[i + 1:]), b[i])
    phi[k - 2] = np.arctan2(b[k - 1], b[k - 2]) % (2 * np.pi)
    return np.concatenate([[max(r, 1e-9)], phi])


def maximize(
    obj: FractionalObjective,
    config: OptimizerConfig | None = None,
    rng: np.random.Generator | None = None,
) -> OptimizerReport:
    """Multistart maximization of ``L`` over the closed unit ball.

    Starts are the direction of ``theta`` followed by random points, alternately
    uniform on the sphere and uniform in the ball.  The first start reaching
    the best value wins ties.
    """
    cfg = config or OptimizerConfig()
    rng = rng if rng is not None else np.random.default_rng()
    ascend = _ascend_cartesian if cfg.method == "cartesian" else _ascend_spherical

    if not np.any(obj.theta):
        return OptimizerReport(0.0, np.zeros(obj.k), 0, 0, 0.0)

    best = None
    converged = 0
    starts = _start_points(obj, cfg.starts, rng)
    for b0 in starts:
        b, val, gr, ok = ascend(obj, b0, cfg)
        converged += bool(ok)
        if best is None or val > best[1]:
            best = (b, val, gr)
    b, val, gr = best
    return OptimizerReport(
        best_value=max(float(val), 0.0),
        best_point=b,
        starts=len(starts),
        converged_starts=converged,
        max_gradient_norm_at_best=_projected_gradient_norm(b, gr),
    )


def fit_objective(fit: FpcaFit) -> FractionalObjective | None:
    """Objective built from a fit, dropping modes with zero spectral weight.

    Those modes have ``theta_j = psi_j = 0`` and only consume norm budget, so
    the maximum is unchanged.  Returns ``None`` if no mode has weight.
    """
    psi = fit.psi
    keep = psi > 0
    if not np.any(keep):
        return None
    return FractionalObjective(fit.rho_coords[keep], psi[keep], fit.a_n)


def small_uniform_statistic(
    fit: FpcaFit,
    beta_n: float,
    config: OptimizerConfig | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[float, OptimizerReport]:
    """``W_n = sqrt(n) / (sigma_eps * beta_n) * max_{|b| <= 1} L(b)``."""
    if not beta_n > 0:
        raise ValueError("beta_n must be positive")
    if not fit.sigma_eps > 0:
        raise ValueError("noise level sigma_eps is zero; the statistic is undefined")
    obj = fit_objective(fit)
    if obj is None:
        report = OptimizerReport(0.0, np.zeros(fit.k_hat), 0, 0, 0.0)
    else:
        report = maximize(obj, config, rng)
        if obj.k != fit.k_hat:
            full = np.zeros(fit.k_hat)
            full[fit.psi > 0] = report.best_point
            report = OptimizerReport(report.best_value, full, report.starts,
                                     report.converged_starts, report.max_gradient_norm_at_best)
    W = np.sqrt(fit.n) / (fit.sigma_eps * beta_n) * report.best_value
    return float(W), report
