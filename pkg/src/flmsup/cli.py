"""Command-line interface: ``flmsup {estimate,test,simulate-null,study}``.

Dataset files are plain CSV with the response in the first column and the
curve values in the remaining columns, on an equispaced grid over [0, 1].
An optional header row whose first cell is not a number (e.g. ``y``) lists
the grid abscissae in the remaining cells.

Exit codes: 0 success, 2 input/config errors, 3 pipeline failures.
Results go to stdout as JSON; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import fpca, gproc, harness
from .fnspace import Dataset, FunctionalSample, Grid, brownian_eigenvalue, coefficient_function
from .smalluniform import OptimizerConfig
from .testing import (
    GpSettings,
    PipelineError,
    TestSpec,
    null_kernel,
    run_test,
    schedule_params,
    simulate_null,
)

EXIT_INPUT = 2
EXIT_PIPELINE = 3


class InputError(ValueError):
    pass


def _float(cell: str, line: int, col: int) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise InputError(f"line {line}, column {col}: cannot parse {cell!r} as a number") from None
    if not math.isfinite(v):
        raise InputError(f"line {line}, column {col}: non-finite value {cell!r}")
    return v


def read_dataset(path) -> Dataset:
    """Parse a dataset CSV, raising :class:`InputError` with line/column positions."""
    try:
        with open(path, newline="") as fh:
            rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh)) if any(c.strip() for c in r)]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise InputError(f"{path}: empty file")
    grid = None
    first_line, first = rows[0]
    try:
        float(first[0])
    except ValueError:
        pts = [_float(c, first_line, j + 2) for j, c in enumerate(first[1:])]
        try:
            grid = Grid.from_points(pts)
        except ValueError as exc:
            raise InputError(f"line {first_line}: bad grid header: {exc}") from None
        rows = rows[1:]
    if not rows:
        raise InputError(f"{path}: no data rows")
    width = len(rows[0][1])
    if width < 3:
        raise InputError(f"line {rows[0][0]}: need a response and at least two curve values")
    Y, X = [], []
    for line, r in rows:
        if len(r) != width:
            raise InputError(f"line {line}: expected {width} columns, got {len(r)}")
        vals = [_float(c, line, j + 1) for j, c in enumerate(r)]
        Y.append(vals[0])
        X.append(vals[1:])
    if grid is None:
        grid = Grid.uniform(width - 1)
    elif len(grid) != width - 1:
        raise InputError(f"grid header has {len(grid)} points but rows have {width - 1} values")
    try:
        return Dataset(grid, np.array(X), np.array(Y))
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _function_arg(spec: str, grid: Grid) -> FunctionalSample:
    if spec in ("rho0", "rho1", "rho2"):
        return coefficient_function(spec, grid)
    try:
        with open(spec) as fh:
            vals = [float(v) for v in fh.read().replace(",", " ").split()]
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read function from {spec}: {exc}") from None
    try:
        return FunctionalSample(grid, np.array(vals))
    except ValueError as exc:
        raise InputError(f"{spec}: {exc}") from None


def _emit(record: dict, out: str | None):
    text = json.dumps(record, indent=2, sort_keys=True)
    sys.stdout.write(text + "\n")
    if out:
        Path(out).write_text(text + "\n")


def _optimizer(args) -> OptimizerConfig:
    return OptimizerConfig(starts=args.starts, max_iters=args.max_iters, grad_tol=args.grad_tol)


def _gp(args) -> GpSettings:
    return GpSettings(n_boundary=args.n_boundary, n_interior=args.n_interior,
                      reps=args.reps, threads=args.threads)


def cmd_estimate(args) -> int:
    data = read_dataset(args.input)
    try:
        eig = fpca.eigensolve(fpca.empirical_covariance(data), data.grid)
        lam1 = float(eig.eigenvalues[0])
        C = args.C if args.C is not None else lam1**args.c_exponent
        if data.n >= 16:
            sched = schedule_params(data.n, C, lam1)
            c_n, a_n, alpha_n = sched.c_n, sched.a_n, sched.alpha_n
        else:
            print(f"warning: n = {data.n} < 16, using c_n = C", file=sys.stderr)
            c_n, a_n = C, 1.0 / data.n**2
            alpha_n = 1.0 / (math.sqrt(data.n) * math.log(data.n))
        c_n = args.cn if args.cn is not None else c_n
        scheme = fpca.RegularizationScheme(args.scheme, c_n, alpha_n if args.scheme == "ridge" else 0.0)
        fitted = fpca.fit(data, scheme, a_n, "estimate" if args.sigma is None else args.sigma, eig, args.k)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: [fit] {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    record = {
        "n": data.n,
        "k_hat": fitted.k_hat,
        "eigenvalues": fitted.eigenvalues.tolist(),
        "rho_coords": fitted.rho_coords.tolist(),
        "sigma_eps": fitted.sigma_eps,
        "scheme": scheme.to_dict(),
    }
    if args.truth:
        record["error"] = harness.error_measure(_function_arg(args.truth, data.grid), fitted)
    if args.fit_out:
        Path(args.fit_out).write_text(fitted.to_json() + "\n")
    _emit(record, None)
    return 0


def cmd_test(args) -> int:
    data = read_dataset(args.input)
    rho0 = _function_arg(args.rho0, data.grid) if args.rho0 else None
    try:
        spec = TestSpec(
            alpha=args.alpha, rho0=rho0, scheme=args.scheme, C=args.C, c_exponent=args.c_exponent,
            sigma=args.sigma, k=args.k, gp=_gp(args), optimizer=_optimizer(args), seed=args.seed,
            baselines=args.baselines,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    try:
        result = run_test(data, spec)
    except PipelineError as exc:
        print(f"error: stage {exc.stage}: {exc.cause}", file=sys.stderr)
        return EXIT_PIPELINE
    _emit(result.to_dict(), args.out)
    return 0


def cmd_simulate_null(args) -> int:
    if args.lambdas:
        try:
            lam = np.array([float(v) for v in args.lambdas.split(",")])
        except ValueError:
            raise InputError(f"cannot parse --lambdas {args.lambdas!r}") from None
        if args.k is not None and args.k != lam.size:
            raise InputError(f"--k {args.k} does not match {lam.size} lambdas")
    else:
        if args.k is None:
            raise InputError("give --k or --lambdas")
        lam = brownian_eigenvalue(np.arange(1, args.k + 1))
    if np.any(lam <= 0):
        raise InputError("lambdas must be positive")
    c_n = args.cn if args.cn is not None else float(lam.min())
    try:
        scheme = fpca.RegularizationScheme(args.scheme, c_n, args.alpha_n if args.scheme == "ridge" else 0.0)
        kern = null_kernel(lam, scheme, args.an)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    try:
        res = simulate_null(kern, _gp(args), args.seed)
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: stage simulate: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    if args.out:
        res.save(args.out)
    record = {
        "K": kern.K,
        "beta": args.beta,
        "reps": res.reps,
        "quantiles": {f"{lvl:.2f}": gproc.quantile(res, args.beta, 1 - lvl) for lvl in (0.90, 0.95, 0.99)},
    }
    _emit(record, None)
    return 0


def cmd_study(args) -> int:
    try:
        raw = json.loads(Path(args.config).read_text())
        if args.threads is not None:
            raw["threads"] = args.threads
        if args.out is not None:
            raw["output"] = args.out
        cfg = harness.StudyConfig.from_dict(raw)
    except (OSError, ValueError, TypeError) as exc:
        raise InputError(f"config error: {exc}") from None
    if not cfg.output:
        raise InputError("config error: no output path (set 'output' or pass --out)")
    cells = harness.run_study(cfg, progress=lambda m: print(m, file=sys.stderr))
    csv_path, manifest = harness.write_study(cells, cfg, cfg.output)
    print(f"wrote {csv_path} and {manifest}", file=sys.stderr)
    sys.stdout.write(Path(csv_path).read_text())
    return 0


def _add_common(p):
    p.add_argument("--scheme", choices=("simple", "ridge"), default="ridge")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=20_000, help="Gaussian supremum repetitions")
    p.add_argument("--n-boundary", type=int, default=312)
    p.add_argument("--n-interior", type=int, default=313)
    p.add_argument("--threads", type=int, default=1)


def _add_truncation(p):
    p.add_argument("--C", type=float, default=None, help="truncation constant (default lambda_1_hat^c)")
    p.add_argument("--c-exponent", type=float, default=3.0)
    p.add_argument("--k", type=int, default=None, help="force the truncation")
    p.add_argument("--sigma", type=float, default=None, help="known noise sd (default: estimate)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flmsup", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="fit the FPCA slope estimator")
    p.add_argument("input")
    p.add_argument("--scheme", choices=("simple", "ridge"), default="ridge")
    _add_truncation(p)
    p.add_argument("--cn", type=float, default=None, help="override the threshold c_n")
    p.add_argument("--truth", default=None, help="rho0|rho1|rho2 or a file of values")
    p.add_argument("--fit-out", default=None, help="write the serialized fit here")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("test", help="test H0: rho = rho0 with the small-uniform statistic")
    p.add_argument("input")
    _add_common(p)
    _add_truncation(p)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--rho0", default=None, help="rho0|rho1|rho2 or a file of values")
    p.add_argument("--baselines", action="store_true", help="also report D_n and T_n")
    p.add_argument("--starts", type=int, default=16)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--grad-tol", type=float, default=1e-6)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate-null", help="simulate the Gaussian supremum and print quantiles")
    _add_common(p)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--lambdas", default=None, help="comma-separated eigenvalues")
    p.add_argument("--cn", type=float, default=None, help="threshold c_n (default min lambda)")
    p.add_argument("--alpha-n", type=float, default=1e-3, help="ridge shift")
    p.add_argument("--an", type=float, default=1e-6, help="roughening a_n")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--out", default=None, help="write sorted samples (JSON)")
    p.set_defaults(func=cmd_simulate_null)

    p = sub.add_parser("study", help="run a Monte Carlo study from a JSON config")
    p.add_argument("config")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=cmd_study)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
