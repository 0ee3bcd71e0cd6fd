"""Command-line interface: ``primepr {solve,bench,trace,selftest}``.

Exit codes: 0 success, 1 invalid spec or arguments, 2 I/O failure,
3 selftest failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from . import bench
from .errors import PrimeError
from .metrics import classify
from .selftest import run_selftest
from .solvers import Algorithm, SolverConfig, solve

EXIT_OK, EXIT_SPEC, EXIT_IO, EXIT_SELFTEST = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_SPEC, f"{self.prog}: error: {message}\n")


def _add_overrides(p, spec_file=True):
    if spec_file:
        p.add_argument("spec", nargs="?", help="TOML experiment spec")
    p.add_argument("--model", choices=["gaussian", "dft"])
    p.add_argument("--K", type=int)
    p.add_argument("--N", type=int, action="append", help="repeatable")
    p.add_argument("--trials", type=int)
    p.add_argument("--noise-var", type=float)
    p.add_argument("--algo", action="append", choices=[a.value for a in Algorithm], help="repeatable")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--threshold", type=float)
    p.add_argument("--accelerate", action="store_true", help="SQUAREM for every MM algorithm")
    p.add_argument("--max-iters", type=int)


def build_parser():
    parser = _Parser(prog="primepr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one random instance and report the error")
    _add_overrides(p, spec_file=False)
    p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("bench", help="Monte Carlo sweep")
    _add_overrides(p)
    p.add_argument("--full", action="store_true", help="1000 trials per cell")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("trace", help="objective versus iteration on one instance")
    _add_overrides(p)

    sub.add_parser("selftest", help="run the invariant checks")
    return parser


def spec_from_args(args) -> bench.ExperimentSpec:
    spec = bench.load_spec(args.spec) if getattr(args, "spec", None) else bench.ExperimentSpec()
    changes = {}
    if args.model:
        changes["matrix_model"] = args.model
    if args.K is not None:
        changes["K"] = args.K
    if args.N:
        changes["N_values"] = args.N
    if args.trials is not None:
        changes["trials"] = args.trials
    if getattr(args, "full", False):
        changes["trials"] = 1000
    if args.noise_var is not None:
        changes["noise_variance"] = args.noise_var
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.out:
        changes["output_dir"] = args.out
    if args.threshold is not None:
        changes["success_threshold"] = args.threshold
    algos = [SolverConfig(algorithm=a) for a in args.algo] if args.algo else list(spec.algorithms)
    if args.accelerate:
        algos = [replace(c, accelerate=True) for c in algos]
    if args.max_iters is not None:
        algos = [replace(c, max_iters=args.max_iters) for c in algos]
    changes["algorithms"] = algos
    try:
        return replace(spec, **changes)
    except bench.SpecError:
        raise
    except (ValueError, TypeError) as exc:
        raise bench.SpecError(str(exc)) from exc


def cmd_solve(args) -> int:
    spec = spec_from_args(args)
    N = spec.N_values[0]
    P, x_o, seed = bench.build_instance(spec, 0, N)
    results = []
    for label, cfg in zip(spec.labels, spec.algorithms):
        run = solve(P, cfg)
        report = classify(run.final_x, x_o, spec.setting, threshold=spec.threshold)
        results.append({
            "algorithm": label,
            "N": N,
            "seed": seed,
            "aligned_sq_error": report.aligned_squared_error,
            "autocorr_sq_error": report.autocorr_squared_error,
            "success": report.success if report.autocorr_success is None else report.autocorr_success,
            "iterations": run.iterations_used,
            "final_objective": run.final_objective,
            "status": run.status.value,
            "wall_time_s": run.wall_time,
        })
    if args.json:
        print(json.dumps(results, indent=2))
    else:
        for r in results:
            extra = "" if r["autocorr_sq_error"] is None else f"  autocorr_err={r['autocorr_sq_error']:.3e}"
            print(f"{r['algorithm']:18s} N={N}  err={r['aligned_sq_error']:.3e}{extra}  "
                  f"iters={r['iterations']}  status={r['status']}  success={r['success']}")
    return EXIT_OK


def cmd_bench(args) -> int:
    spec = spec_from_args(args)
    summary = bench.run_experiment(spec, workers=args.workers)
    print(f"{'algorithm':18s} {'N':>4s} {'success':>8s} {'mse':>11s} {'iters':>7s} {'time_s':>9s}")
    for row in summary:
        print(f"{row['algorithm']:18s} {row['N']:4d} {row['success_probability']:8.3f} "
              f"{row['mean_squared_error']:11.3e} {row['mean_iterations']:7.1f} {row['mean_wall_time']:9.2e}")
    print(f"wrote {spec.output_dir}/trials.csv, summary.csv, summary.json")
    return EXIT_OK


def cmd_trace(args) -> int:
    spec = spec_from_args(args)
    path = bench.trace_experiment(spec)
    print(f"wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            return EXIT_OK if run_selftest() else EXIT_SELFTEST
        with np.errstate(over="ignore", invalid="ignore"):
            return {"solve": cmd_solve, "bench": cmd_bench, "trace": cmd_trace}[args.command](args)
    except bench.SpecError as exc:
        print(f"primepr: invalid spec: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except OSError as exc:
        print(f"primepr: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except PrimeError as exc:
        print(f"primepr: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
