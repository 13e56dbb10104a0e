"""Hypothesis test of ``H0: rho = rho0`` with the small-uniform statistic.

Also provides the analysis-of-variance style baselines ``D_n`` and ``T_n``
which compare against chi-square and normal limits.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy import stats

from . import fpca, gproc
from .fnspace import Dataset, FunctionalSample, GridMismatchError
from .smalluniform import OptimizerConfig, small_uniform_statistic

__all__ = [
    "PipelineError",
    "Schedule",
    "GpSettings",
    "TestSpec",
    "TestResult",
    "schedule_params",
    "reduce_null",
    "dn_statistic",
    "tn_statistic",
    "baseline_decisions",
    "null_kernel",
    "simulate_null",
    "run_test",
]


class PipelineError(RuntimeError):
    """A failure inside the testing pipeline, tagged with the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class Schedule:
    c_n: float
    a_n: float
    alpha_n: float
    beta_n: float


def _rate_quantities(n, c_n, a_n, alpha_n):
    r1 = 1 / math.log(n) / c_n**3.25 * math.log(1 / math.sqrt(c_n)) ** 4.5 if c_n < 1 else 0.0
    r2 = a_n / math.sqrt(c_n) * abs(math.log(1 / math.sqrt(c_n)))
    r3 = alpha_n * math.sqrt(n) / c_n
    return r1, r2, r3


def schedule_params(
    n: int,
    C: float,
    lambda1_hat: float | None = None,
    *,
    a_n: Callable[[int], float] | None = None,
    alpha_n: Callable[[int], float] | None = None,
    beta_n: Callable[[int], float] | None = None,
) -> Schedule:
    """Regularization schedule for sample size ``n``.

    Defaults: ``c_n = C / log log n``, ``a_n = 1 / n^2``,
    ``alpha_n = 1 / (sqrt(n) log n)`` and ``beta_n = (log n)^2``.  Any of the
    last three can be overridden by a callable of ``n``; overrides are
    checked for the rate requirements (the relevant products must shrink as
    ``n`` grows) and a ``RuntimeWarning`` is issued if they do not.
    """
    if n < 16:
        raise ValueError("schedule undefined for n < 16")
    if not C > 0:
        raise ValueError("C must be positive")
    a_rule = a_n or (lambda m: 1.0 / m**2)
    al_rule = alpha_n or (lambda m: 1.0 / (math.sqrt(m) * math.log(m)))
    b_rule = beta_n or (lambda m: math.log(m) ** 2)

    def c_rule(m):
        return C / math.log(math.log(m))

    checks = [(i, name) for i, (name, rule) in enumerate((("a_n", a_n), ("alpha_n", alpha_n)), 1) if rule]
    if checks:
        ns = [n, 10 * n, 100 * n, 1000 * n]
        seq = [_rate_quantities(m, c_rule(m), a_rule(m), al_rule(m)) for m in ns]
        for i, name in checks:
            vals = [s[i] for s in seq]
            if any(b > a for a, b in zip(vals, vals[1:])):
                warnings.warn(f"override breaks the {name} rate requirement", RuntimeWarning, stacklevel=2)
    if beta_n is not None:
        bs = [b_rule(m) for m in (n, 10 * n, 100 * n)]
        if not bs[0] < bs[1] < bs[2]:
            warnings.warn("beta_n should increase to infinity", RuntimeWarning, stacklevel=2)

    c_n = c_rule(n)
    if lambda1_hat is not None and c_n >= lambda1_hat:
        warnings.warn(f"c_n = {c_n:.4g} is not below lambda_1 = {lambda1_hat:.4g}",
                      RuntimeWarning, stacklevel=2)
    return Schedule(c_n=c_n, a_n=a_rule(n), alpha_n=al_rule(n), beta_n=b_rule(n))


def reduce_null(data: Dataset, rho0: FunctionalSample | None, eig: fpca.Eigensystem, k: int) -> Dataset:
    """``Y' = Y - <X, P_k rho0>`` with ``P_k`` the projection on the first ``k`` eigenfunctions."""
    if rho0 is None:
        return data
    if rho0.grid != data.grid or eig.grid != data.grid:
        raise GridMismatchError("rho0, eigensystem and data must share a grid")
    if not np.any(rho0.values):
        return data
    c0 = eig.scores(rho0.values[None, :], k)[0]
    return data.with_response(data.Y - eig.scores(data.X, k) @ c0)


def dn_statistic(data: Dataset, eig: fpca.Eigensystem, k: int, sigma: float) -> float:
    """``D_n = (n / sigma^2) sum_{j <= k} Delta_j^2 / lambda_j``.

    ``Delta_j = (1/n) sum_i <X_i, e_j> Y_i``.  Each term is asymptotically
    ``chi^2(1)`` under the null, so ``D_n`` is approximately ``chi^2(k)``.
    """
    if not 1 <= k <= len(eig):
        raise ValueError(f"k must lie in 1..{len(eig)}")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    delta = eig.scores(data.X, k).T @ data.Y / data.n
    return float(data.n / sigma**2 * np.sum(delta**2 / eig.eigenvalues[:k]))


def tn_statistic(D_n: float, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    return (D_n - k) / math.sqrt(k)


def baseline_decisions(D_n: float, T_n: float, k: int, alpha: float) -> tuple[bool, bool]:
    """Reject if ``D_n > chi2_{k, 1-alpha}`` / ``|T_n| > sqrt(2) z_{1-alpha/2}``."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    reject_D = D_n > stats.chi2.ppf(1 - alpha, k)
    reject_T = abs(T_n) > math.sqrt(2) * stats.norm.ppf(1 - alpha / 2)
    return bool(reject_D), bool(reject_T)


@dataclass(frozen=True)
class GpSettings:
    """Index points and repetitions for the Gaussian supremum.

    625 points by default (312 on the sphere, 313 inside) so the covariance
    matrix is 625 x 625.
    """

    n_boundary: int = 312
    n_interior: int = 313
    reps: int = 20_000
    threads: int = 1


def null_kernel(eigenvalues, scheme: fpca.RegularizationScheme, a_n: float, support=None) -> gproc.GpKernel:
    lam = np.asarray(eigenvalues, dtype=float)
    return gproc.GpKernel(lam, np.asarray(scheme.f_n(lam, support), dtype=float), a_n)


def simulate_null(kernel: gproc.GpKernel, gp: GpSettings, seed) -> gproc.SupSimResult:
    ss = gproc._as_seed_sequence(seed)
    pts_seed, path_seed = ss.spawn(2)
    points = gproc.sample_index_points(kernel.K, gp.n_boundary, gp.n_interior,
                                       np.random.default_rng(pts_seed))
    return gproc.simulate_sup(kernel, points, gp.reps, path_seed, threads=gp.threads)


@dataclass(frozen=True, eq=False)
class TestSpec:
    """Everything needed to run one test.

    ``C`` fixes the truncation constant directly; otherwise
    ``C = lambda_1_hat ** c_exponent``.  ``k`` forces the truncation instead of
    the empirical rule, and ``support`` (population eigenvalues) then decides
    which modes pass ``>= c_n``.  ``sigma=None`` estimates the noise level.
    """

    __test__ = False  # not a pytest class

    alpha: float = 0.05
    rho0: FunctionalSample | None = None
    scheme: Literal["simple", "ridge"] = "ridge"
    C: float | None = None
    c_exponent: float = 3.0
    sigma: float | None = None
    k: int | None = None
    support: tuple | None = None
    gp: GpSettings = field(default_factory=GpSettings)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    seed: int = 0
    baselines: bool = False

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.C is not None and not self.C > 0:
            raise ValueError("C must be positive")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass
class TestResult:
    __test__ = False

    W_n: float
    q: float
    reject: bool
    k_hat: int
    alpha: float
    n: int
    sigma_eps: float
    schedule: dict
    scheme: dict
    seed: int
    D_n: float | None = None
    T_n: float | None = None
    reject_D: bool | None = None
    reject_T: bool | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def decision(self) -> str:
        return "reject" if self.reject else "accept"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["decision"] = self.decision
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise PipelineError(name, exc) from exc


def run_test(data: Dataset, spec: TestSpec, null: gproc.SupSimResult | None = None) -> TestResult:
    """Run the full testing recipe on one dataset.

    Stages: eigendecomposition, schedule, truncation, null reduction, FPCA
    fit, small-uniform statistic, Gaussian supremum simulation, quantile and
    decision.  A precomputed ``null`` distribution skips the simulation.
    Failures are raised as :class:`PipelineError` carrying the stage name.
    """
    opt_seed, gp_seed = np.random.SeedSequence(spec.seed).spawn(2)
    eig = _stage("eigensolve", lambda: fpca.eigensolve(fpca.empirical_covariance(data), data.grid))
    lam1 = float(eig.eigenvalues[0])
    C = spec.C if spec.C is not None else lam1**spec.c_exponent
    sched = _stage("schedule", schedule_params, data.n, C, lam1)
    scheme = _stage("schedule", fpca.RegularizationScheme, spec.scheme, sched.c_n,
                    sched.alpha_n if spec.scheme == "ridge" else 0.0)
    k = spec.k if spec.k is not None else _stage("truncation", fpca.truncation, eig, sched.c_n)
    if k > len(eig):
        raise PipelineError("truncation", ValueError(f"k = {k} exceeds {len(eig)} eigenvalues"))
    reduced = _stage("reduce_null", reduce_null, data, spec.rho0, eig, k)
    fitted = _stage("fit", fpca.fit, reduced, scheme, sched.a_n,
                    "estimate" if spec.sigma is None else spec.sigma, eig, k, spec.support)
    W, report = _stage("statistic", small_uniform_statistic, fitted, sched.beta_n,
                       spec.optimizer, np.random.default_rng(opt_seed))
    if null is None:
        support = None if spec.support is None else np.asarray(spec.support)[:k]
        kern = _stage("simulate", null_kernel, eig.eigenvalues[:k], scheme, sched.a_n, support)
        null = _stage("simulate", simulate_null, kern, spec.gp, gp_seed)
    q = _stage("quantile", gproc.quantile, null, sched.beta_n, spec.alpha)

    result = TestResult(
        W_n=W, q=q, reject=bool(W > q), k_hat=k, alpha=spec.alpha, n=data.n,
        sigma_eps=fitted.sigma_eps, schedule=asdict(sched), scheme=scheme.to_dict(),
        seed=spec.seed,
        diagnostics={
            "optimizer": report.to_dict(),
            "simulation": {"reps": null.reps, **null.meta},
            "eigenvalues": eig.eigenvalues[:k].tolist(),
        },
    )
    if spec.baselines:
        D = _stage("baselines", dn_statistic, reduced, eig, k, fitted.sigma_eps)
        T = tn_statistic(D, k)
        rD, rT = baseline_decisions(D, T, k, spec.alpha)
        result.D_n, result.T_n, result.reject_D, result.reject_T = D, T, rD, rT
    return result
