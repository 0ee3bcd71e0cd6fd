"""Seeded Monte Carlo experiments over algorithms, N values and noise levels.

Every (trial, N) cell derives its own seed from the master seed, so results
do not depend on execution order and trials can run in a process pool.
All algorithms in a cell see the same problem instance.

Outputs (in ``output_dir``):

``trials.csv``
    one row per (algorithm, N, trial), columns :data:`TRIAL_COLUMNS`.
``summary.csv`` / ``summary.json``
    one row per (algorithm, N), columns :data:`SUMMARY_COLUMNS`.
``trace.csv``
    written by :func:`trace_experiment`, one row per iteration.
"""
from __future__ import annotations

import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError, PrimeError
from .metrics import AUTOCORR_THRESHOLD, GAUSSIAN_THRESHOLD, Setting, classify
from .problem import (
    MatrixKind,
    complex_normal,
    gen_dft_ensemble,
    gen_gaussian_ensemble,
    make_instance,
)
from .solvers import RunStatus, SolverConfig, solve

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

TRIAL_COLUMNS = (
    "trial_index", "algorithm", "N", "seed", "aligned_sq_error", "autocorr_sq_error",
    "success", "autocorr_success", "iterations", "wall_time_s", "final_objective", "status",
)
SUMMARY_COLUMNS = (
    "algorithm", "N", "mean_squared_error", "success_probability", "mean_wall_time", "mean_iterations",
)
WALL_TIME_COLUMNS = ("wall_time_s", "mean_wall_time")


class SpecError(InvalidArgumentError):
    """Malformed experiment spec."""


@dataclass(frozen=True)
class ExperimentSpec:
    matrix_model: MatrixKind = MatrixKind.GAUSSIAN
    K: int = 10
    N_values: Sequence[int] = (50,)
    trials: int = 100
    noise_variance: float = 0.0
    algorithms: Sequence[SolverConfig] = (SolverConfig(),)
    master_seed: int = 0
    success_threshold: Optional[float] = None
    output_dir: Path = Path("results")

    def __post_init__(self):
        object.__setattr__(self, "matrix_model", MatrixKind(self.matrix_model))
        object.__setattr__(self, "N_values", tuple(int(n) for n in self.N_values))
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        algos = tuple(a if isinstance(a, SolverConfig) else _solver_config(a) for a in self.algorithms)
        object.__setattr__(self, "algorithms", algos)
        if self.K < 1:
            raise SpecError("K must be positive")
        if self.trials < 1:
            raise SpecError("trials must be >= 1")
        if not self.N_values or min(self.N_values) < 1:
            raise SpecError("N_values must be a nonempty list of positive integers")
        if self.matrix_model is MatrixKind.PARTIAL_DFT and min(self.N_values) < self.K:
            raise SpecError("partial DFT requires N >= K for every N")
        if self.noise_variance < 0:
            raise SpecError("noise_variance must be nonnegative")
        if not self.algorithms:
            raise SpecError("at least one algorithm is required")
        if self.success_threshold is not None and not self.success_threshold > 0:
            raise SpecError("success_threshold must be positive")

    @property
    def setting(self) -> Setting:
        if self.matrix_model is MatrixKind.GAUSSIAN:
            return Setting.GAUSSIAN_DIRECT
        return Setting.DFT_AUTOCORR

    @property
    def threshold(self) -> float:
        if self.success_threshold is not None:
            return self.success_threshold
        return GAUSSIAN_THRESHOLD if self.setting is Setting.GAUSSIAN_DIRECT else AUTOCORR_THRESHOLD

    @property
    def labels(self) -> List[str]:
        """Unique column labels, ``#i`` suffixes on repeated configs."""
        seen = {}
        out = []
        for cfg in self.algorithms:
            base = cfg.label
            seen[base] = seen.get(base, 0) + 1
            out.append(base if seen[base] == 1 else f"{base}#{seen[base]}")
        return out


@dataclass
class TrialRecord:
    trial_index: int
    algorithm: str
    N: int
    seed: int
    aligned_sq_error: float
    autocorr_sq_error: Optional[float]
    success: bool
    autocorr_success: Optional[bool]
    iterations: int
    wall_time_s: float
    final_objective: float
    status: str

    @property
    def setting_success(self) -> bool:
        return self.success if self.autocorr_success is None else self.autocorr_success

    @property
    def setting_error(self) -> float:
        return self.aligned_sq_error if self.autocorr_sq_error is None else self.autocorr_sq_error


# ---------------------------------------------------------------- spec files

_CONFIG_FIELDS = {f.name for f in fields(SolverConfig)}
_SPEC_FIELDS = {f.name for f in fields(ExperimentSpec)}


def _solver_config(entry) -> SolverConfig:
    if isinstance(entry, str):
        entry = {"algorithm": entry}
    if not isinstance(entry, dict):
        raise SpecError(f"algorithm entry must be a name or a table, got {entry!r}")
    unknown = set(entry) - _CONFIG_FIELDS
    if unknown:
        raise SpecError(f"unknown algorithm keys: {sorted(unknown)}")
    try:
        return SolverConfig(**entry)
    except (ValueError, TypeError) as exc:
        raise SpecError(str(exc)) from exc


def spec_from_dict(data: dict) -> ExperimentSpec:
    unknown = set(data) - _SPEC_FIELDS
    if unknown:
        raise SpecError(f"unknown spec keys: {sorted(unknown)}")
    data = dict(data)
    if "algorithms" in data:
        data["algorithms"] = [_solver_config(a) for a in data["algorithms"]]
    try:
        return ExperimentSpec(**data)
    except SpecError:
        raise
    except (ValueError, TypeError) as exc:
        raise SpecError(str(exc)) from exc


def load_spec(path) -> ExperimentSpec:
    """Read a TOML experiment spec; keys mirror :class:`ExperimentSpec`."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise SpecError(f"{path}: {exc}") from exc
    return spec_from_dict(data)


def _config_dict(cfg: SolverConfig) -> dict:
    d = asdict(cfg)
    d["algorithm"] = cfg.algorithm.value
    return {k: v for k, v in d.items() if v is not None}


def spec_to_dict(spec: ExperimentSpec) -> dict:
    out = {
        "matrix_model": spec.matrix_model.value,
        "K": spec.K,
        "N_values": list(spec.N_values),
        "trials": spec.trials,
        "noise_variance": spec.noise_variance,
        "algorithms": [_config_dict(c) for c in spec.algorithms],
        "master_seed": spec.master_seed,
        "output_dir": str(spec.output_dir),
    }
    if spec.success_threshold is not None:
        out["success_threshold"] = spec.success_threshold
    return out


# ---------------------------------------------------------------- seeding

def derive_seed(*keys: int) -> int:
    """Stable 63-bit seed from integer keys."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(1, dtype=np.uint64)[0]
    return int(state >> np.uint64(1))


def trial_seed(spec: ExperimentSpec, trial_index: int, N: int) -> int:
    return derive_seed(spec.master_seed, trial_index, N)


def ground_truth(spec: ExperimentSpec, seed: int) -> np.ndarray:
    """Unit-norm signal: fixed per experiment for Gaussian, per trial for DFT."""
    if spec.matrix_model is MatrixKind.GAUSSIAN:
        rng = np.random.default_rng([spec.master_seed, 0x5EED])
    else:
        rng = np.random.default_rng([seed, 0x5EED])
    x = complex_normal(rng, spec.K)
    return x / np.linalg.norm(x)


def build_instance(spec: ExperimentSpec, trial_index: int, N: int):
    seed = trial_seed(spec, trial_index, N)
    x_o = ground_truth(spec, seed)
    if spec.matrix_model is MatrixKind.GAUSSIAN:
        A = gen_gaussian_ensemble(spec.K, N, seed)
    else:
        A = gen_dft_ensemble(spec.K, N)
    P = make_instance(A, x_o, spec.noise_variance, seed=derive_seed(seed, 1))
    return P, x_o, seed


# ---------------------------------------------------------------- trials

def run_trial(spec: ExperimentSpec, trial_index: int, N: int, algorithm_cfg: SolverConfig,
              label: Optional[str] = None) -> TrialRecord:
    """Build the (trial, N) instance, solve it and score the result.

    Solver failures become a ``failed:...`` status; they are never raised.
    """
    P, x_o, seed = build_instance(spec, trial_index, N)
    label = label or algorithm_cfg.label
    try:
        run = solve(P, algorithm_cfg)
        x = run.final_x
        status = run.status.value
        if run.status is RunStatus.FAILED:
            status = f"failed:{run.failure_reason}"
        iterations, wall, f_final = run.iterations_used, run.wall_time, run.final_objective
    except PrimeError as exc:
        x = np.zeros(spec.K, dtype=complex)
        status = f"failed:{type(exc).__name__}: {exc}"
        iterations, wall, f_final = 0, 0.0, math.nan

    is_gauss = spec.setting is Setting.GAUSSIAN_DIRECT
    report = classify(x, x_o, spec.setting, threshold=spec.threshold)
    success = report.success if is_gauss else report.aligned_squared_error < GAUSSIAN_THRESHOLD
    return TrialRecord(
        trial_index=trial_index,
        algorithm=label,
        N=N,
        seed=seed,
        aligned_sq_error=report.aligned_squared_error,
        autocorr_sq_error=report.autocorr_squared_error,
        success=bool(success),
        autocorr_success=report.autocorr_success,
        iterations=iterations,
        wall_time_s=wall,
        final_objective=f_final,
        status=status,
    )


def _run_cell(args):
    spec, trial_index, N, cfg, label = args
    return run_trial(spec, trial_index, N, cfg, label)


def _cells(spec: ExperimentSpec):
    for label, cfg in zip(spec.labels, spec.algorithms):
        for N in spec.N_values:
            for t in range(spec.trials):
                yield spec, t, N, cfg, label


def aggregate(records: Sequence[TrialRecord]) -> List[dict]:
    """Per (algorithm, N) means; success probability from exact counts."""
    groups = {}
    for rec in records:
        groups.setdefault((rec.algorithm, rec.N), []).append(rec)
    rows = []
    for (algo, N), recs in groups.items():
        n = len(recs)
        wins = sum(1 for r in recs if r.setting_success)
        rows.append({
            "algorithm": algo,
            "N": N,
            "mean_squared_error": float(np.mean([r.setting_error for r in recs])),
            "success_probability": float(Fraction(wins, n)),
            "mean_wall_time": float(np.mean([r.wall_time_s for r in recs])),
            "mean_iterations": float(np.mean([r.iterations for r in recs])),
            "trials": n,
            "failures": sum(1 for r in recs if r.status.startswith("failed")),
        })
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def ensure_writable(directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    probe = directory / ".write-probe"
    probe.write_text("")
    probe.unlink()
    return directory


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> List[dict]:
    """Run every (algorithm, N, trial) cell and write the CSV/JSON outputs.

    Raises ``OSError`` before any solve when ``output_dir`` is unusable.
    """
    out = ensure_writable(spec.output_dir)
    cells = list(_cells(spec))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_cell, cells, chunksize=max(1, len(cells) // (8 * workers))))
    else:
        records = [_run_cell(c) for c in cells]

    write_csv(out / "trials.csv", TRIAL_COLUMNS, [asdict(r) for r in records])
    summary = aggregate(records)
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary)
    with open(out / "summary.json", "w") as fh:
        json.dump({"spec": spec_to_dict(spec), "summary": summary}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def trace_experiment(spec: ExperimentSpec, single_N: Optional[int] = None, trial_index: int = 0) -> Path:
    """Objective-versus-iteration for every algorithm on one shared instance.

    Both the intensity and the amplitude objective are recorded for every
    algorithm. Runs that stop early are padded with their final value, so
    the CSV always has ``max(max_iters) + 1`` rows.
    """
    out = ensure_writable(spec.output_dir)
    N = spec.N_values[0] if single_N is None else int(single_N)
    P, _, _ = build_instance(spec, trial_index, N)
    n_rows = max(cfg.max_iters for cfg in spec.algorithms) + 1
    columns = ["iteration"]
    series = {}
    for label, cfg in zip(spec.labels, spec.algorithms):
        run = solve(P, cfg)
        for name, trace in (("squared", run.squared_trace), ("modulus", run.modulus_trace)):
            col = f"{label}:{name}"
            columns.append(col)
            series[col] = list(trace) + [trace[-1]] * (n_rows - len(trace))
    rows = [{"iteration": i, **{c: series[c][i] for c in columns[1:]}} for i in range(n_rows)]
    path = out / "trace.csv"
    write_csv(path, columns, rows)
    return path
