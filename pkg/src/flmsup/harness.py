"""Monte Carlo size/power studies for the small-uniform test and the baselines."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Callable, Literal

import numpy as np

from . import fpca
from .fnspace import (
    FunctionalSample,
    Grid,
    brownian_eigenvalue,
    coefficient_function,
    generate_dataset,
    snr_sigma,
)
from .fpca import FpcaFit
from .gproc import quantile
from .smalluniform import OptimizerConfig, small_uniform_statistic
from .testing import (
    GpSettings,
    PipelineError,
    baseline_decisions,
    dn_statistic,
    null_kernel,
    schedule_params,
    simulate_null,
    tn_statistic,
)

__all__ = [
    "StudyConfig",
    "CellReport",
    "CSV_COLUMNS",
    "error_measure",
    "deterministic_k",
    "run_study",
    "write_study",
]

CSV_COLUMNS = (
    "rho", "mode", "n", "c", "scheme", "reps", "failures", "mean_k_hat", "k_sup",
    "q", "reject_rate_W", "reject_rate_D", "reject_rate_T", "mean_log_error",
)

# spawn-key slot reserved for the null distribution of a cell
_NULL_SLOT = 2**31


@dataclass(frozen=True)
class StudyConfig:
    rho_kind: Literal["rho0", "rho1", "rho2"] = "rho0"
    snr: float | None = None
    sigma_eps: float = 1.0
    n_list: tuple[int, ...] = (50, 200, 1000)
    n_sims: int = 200
    c_exponents: tuple[float, ...] = (2, 3, 4, 5, 7, 8)
    truncation_mode: Literal["deterministic", "data_based"] = "deterministic"
    schemes: tuple[str, ...] = ("simple", "ridge")
    alpha: float = 0.05
    sigma_mode: Literal["known", "estimate"] = "known"
    grid_size: int = 100
    gp: GpSettings = field(default_factory=GpSettings)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    seed: int = 0
    threads: int = 1
    output: str | None = None

    def __post_init__(self):
        if self.rho_kind not in ("rho0", "rho1", "rho2"):
            raise ValueError(f"unknown rho_kind {self.rho_kind!r}")
        if self.n_sims < 1:
            raise ValueError("n_sims must be >= 1")
        if not self.n_list or any(n < 16 for n in self.n_list):
            raise ValueError("every sample size must be >= 16")
        if not self.c_exponents or any(c <= 0 for c in self.c_exponents):
            raise ValueError("exponents must be positive")
        if self.truncation_mode not in ("deterministic", "data_based"):
            raise ValueError(f"unknown truncation_mode {self.truncation_mode!r}")
        if not self.schemes or any(s not in ("simple", "ridge") for s in self.schemes):
            raise ValueError("schemes must be drawn from 'simple' and 'ridge'")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.sigma_mode not in ("known", "estimate"):
            raise ValueError(f"unknown sigma_mode {self.sigma_mode!r}")
        if self.snr is not None and not 0 < self.snr < 1:
            raise ValueError("snr must lie in (0, 1)")
        if self.rho_kind != "rho0" and self.snr is None:
            raise ValueError(f"{self.rho_kind} needs an snr")
        if not self.sigma_eps > 0:
            raise ValueError("sigma_eps must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> StudyConfig:
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "gp" in d:
            d["gp"] = GpSettings(**d["gp"])
        if "optimizer" in d:
            d["optimizer"] = OptimizerConfig(**d["optimizer"])
        for key in ("n_list", "c_exponents", "schemes"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def load(cls, path) -> StudyConfig:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class CellReport:
    rho: str
    mode: str
    n: int
    c: float
    scheme: str
    reps: int
    failures: int
    mean_k_hat: float
    k_sup: int
    q: float
    reject_rate_W: float
    reject_rate_D: float | None
    reject_rate_T: float | None
    mean_log_error: float

    def row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


def error_measure(rho_true: FunctionalSample, fit: FpcaFit) -> float:
    """Integrated squared error of ``rho_hat``, relative to ``int rho^2`` unless ``rho = 0``."""
    if rho_true.grid != fit.grid:
        raise ValueError("rho and fit must share a grid")
    w = fit.grid.weights
    diff = rho_true.values - fit.slope().values
    num = float(np.sum(w * diff**2))
    if not np.any(rho_true.values):
        return num
    return num / float(np.sum(w * rho_true.values**2))


def deterministic_k(n: int, c: float) -> int:
    """Truncation from the known Brownian spectrum with ``c_n = lambda_1^c / log log n``."""
    if n < 16:
        raise ValueError("n must be >= 16")
    lam1 = float(brownian_eigenvalue(1))
    c_n = lam1**c / math.log(math.log(n))
    # l_p + gap_p/2 <= 1.5 l_p, so nothing qualifies once 1.5 l_p < c_n
    P = 2
    while 1.5 * float(brownian_eigenvalue(P)) >= c_n:
        P *= 2
    lam = brownian_eigenvalue(np.arange(1, P + 2))
    gaps = fpca.spectral_gaps(lam)
    hits = [p for p in range(1, P + 1) if lam[p - 1] + gaps[p - 1] / 2 >= c_n]
    if not hits:
        raise fpca.EmptyTruncationError(f"truncation empty for n={n}, c={c}")
    return max(hits)


@dataclass
class _Rep:
    ok: bool
    k: int = 0
    W: float = 0.0
    reject_D: bool | None = None
    reject_T: bool | None = None
    log_error: float = float("nan")
    lam: np.ndarray | None = None


def _cells(cfg: StudyConfig):
    return list(product(cfg.n_list, cfg.c_exponents, cfg.schemes))


def _run_cell(cfg: StudyConfig, ci: int, n: int, c: float, scheme_kind: str, grid: Grid,
              rho: FunctionalSample, sigma: float) -> CellReport:
    deterministic = cfg.truncation_mode == "deterministic"
    k_det = support = sched = scheme = None
    if deterministic:
        k_det = deterministic_k(n, c)
        support = brownian_eigenvalue(np.arange(1, k_det + 1))
        sched = schedule_params(n, float(brownian_eigenvalue(1)) ** c)
        scheme = fpca.RegularizationScheme(scheme_kind, sched.c_n,
                                           sched.alpha_n if scheme_kind == "ridge" else 0.0)
    sigma_arg = sigma if cfg.sigma_mode == "known" else "estimate"

    def one(r: int) -> _Rep:
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(ci, r)))
        data = generate_dataset(n, rho, sigma, rng)
        try:
            eig = fpca.eigensolve(fpca.empirical_covariance(data), grid)
            if deterministic:
                sch, sc, k = sched, scheme, k_det
            else:
                lam1 = float(eig.eigenvalues[0])
                sc_ = schedule_params(n, lam1**c, lam1)
                sch = sc_
                sc = fpca.RegularizationScheme(scheme_kind, sc_.c_n,
                                               sc_.alpha_n if scheme_kind == "ridge" else 0.0)
                k = fpca.truncation(eig, sc_.c_n)
            f = fpca.fit(data, sc, sch.a_n, sigma_arg, eig, k, support)
            W, _ = small_uniform_statistic(f, sch.beta_n, cfg.optimizer, rng)
            rep = _Rep(True, k, W, log_error=math.log(error_measure(rho, f)))
            if deterministic:
                D = dn_statistic(data, eig, k, f.sigma_eps)
                rep.reject_D, rep.reject_T = baseline_decisions(D, tn_statistic(D, k), k, cfg.alpha)
            else:
                rep.lam = eig.eigenvalues
            return rep
        except (ValueError, ArithmeticError, np.linalg.LinAlgError, PipelineError):
            return _Rep(False)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            reps = list(ex.map(one, range(cfg.n_sims)))
    else:
        reps = [one(r) for r in range(cfg.n_sims)]
    good = [r for r in reps if r.ok]
    failures = len(reps) - len(good)
    nan = float("nan")
    if not good:
        return CellReport(cfg.rho_kind, cfg.truncation_mode, n, c, scheme_kind, len(reps),
                          failures, nan, 0, nan, nan, None, None, nan)

    ks = np.array([r.k for r in good])
    null_seed = np.random.SeedSequence(cfg.seed, spawn_key=(ci, _NULL_SLOT))
    if deterministic:
        K = k_det
        kern = null_kernel(support, scheme, sched.a_n, support)
        beta = sched.beta_n
    else:
        K = int(math.ceil(ks.mean() - 1e-12))
        lam = np.mean([r.lam[:K] for r in good if r.lam.size >= K], axis=0)
        s = schedule_params(n, float(lam[0]) ** c)
        sc = fpca.RegularizationScheme(scheme_kind, s.c_n, s.alpha_n if scheme_kind == "ridge" else 0.0)
        kern = null_kernel(lam, sc, s.a_n)
        beta = s.beta_n
    q = quantile(simulate_null(kern, cfg.gp, null_seed), beta, cfg.alpha)

    Ws = np.array([r.W for r in good])
    rate_D = rate_T = None
    if deterministic:
        rate_D = float(np.mean([r.reject_D for r in good]))
        rate_T = float(np.mean([r.reject_T for r in good]))
    return CellReport(
        rho=cfg.rho_kind, mode=cfg.truncation_mode, n=n, c=c, scheme=scheme_kind,
        reps=len(reps), failures=failures, mean_k_hat=float(ks.mean()), k_sup=K, q=q,
        reject_rate_W=float(np.mean(Ws > q)), reject_rate_D=rate_D, reject_rate_T=rate_T,
        mean_log_error=float(np.mean([r.log_error for r in good])),
    )


def run_study(cfg: StudyConfig, progress: Callable[[str], None] | None = None) -> list[CellReport]:
    """Run every ``(n, c, scheme)`` cell of the study.

    Replication ``r`` of cell ``i`` draws from ``SeedSequence(seed, spawn_key=(i, r))``
    so cells and replications are reproducible independently of each other
    and of the thread count.  Replications that fail are counted, not raised.
    """
    grid = Grid.uniform(cfg.grid_size)
    rho = coefficient_function(cfg.rho_kind, grid)
    sigma = snr_sigma(rho, cfg.snr) if cfg.rho_kind != "rho0" else cfg.sigma_eps
    cells = _cells(cfg)
    out = []
    for ci, (n, c, scheme_kind) in enumerate(cells):
        if progress:
            progress(f"cell {ci + 1}/{len(cells)}: n={n} c={c} scheme={scheme_kind}")
        out.append(_run_cell(cfg, ci, n, c, scheme_kind, grid, rho, sigma))
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_study(cells: list[CellReport], cfg: StudyConfig, path) -> tuple[Path, Path]:
    """Write the cell table as CSV and the config echo as ``<path>.manifest.json``."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for cell in cells:
            w.writerow([_fmt(v) for v in cell.row()])
    manifest = path.with_name(path.name + ".manifest.json")
    with open(manifest, "w") as fh:
        json.dump({"config": cfg.to_dict(), "columns": list(CSV_COLUMNS), "cells": len(cells)},
                  fh, indent=2, sort_keys=True)
    return path, manifest
