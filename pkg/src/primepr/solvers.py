"""Phase retrieval solvers behind one interface.

Two baselines (Wirtinger Flow, Gerchberg-Saxton) and four MM algorithms:

* ``modulus-single`` - Cauchy-Schwarz majorizer of the amplitude loss; a
  least-squares solve per step (identical to Gerchberg-Saxton).
* ``modulus-both``  - additionally majorizes ``x^H A A^H x``; a gradient-like
  step with step size ``1 / lambda_max(A A^H)``.
* ``power``         - lifted quadratic majorizer of the intensity loss; each
  step is the leading eigenpair of ``W``, approximated by power iteration.
* ``power-bt``      - second majorization on the sphere with a backtracked
  shift ``E``; no eigen-solve at all.

The lifted matrices ``X = x x^H``, ``A_i = a_i a_i^H`` and ``Phi`` are never
formed; everything is evaluated through ``x`` and the columns of ``A``.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Union

import numpy as np

from . import accel
from .errors import (
    BacktrackingDivergedError,
    DegenerateMatrixError,
    InvalidArgumentError,
)
from .linalg import gram_solve, lambda_max_gram, lambda_max_phi, power_iteration
from .problem import (
    ProblemInstance,
    gradient_squared,
    objective_modulus,
    objective_squared,
    spectral_init,
)

log = logging.getLogger(__name__)

MAX_INNER_PASSES = 60
MAX_HALVINGS = 50


class Algorithm(str, Enum):
    WIRTINGER_FLOW = "wf"
    GERCHBERG_SAXTON = "gs"
    MODULUS_SINGLE_TERM = "modulus-single"
    MODULUS_BOTH_TERMS = "modulus-both"
    POWER = "power"
    POWER_BACKTRACKING = "power-bt"

    @property
    def squared_family(self) -> bool:
        return self in (Algorithm.WIRTINGER_FLOW, Algorithm.POWER, Algorithm.POWER_BACKTRACKING)

    @property
    def mm(self) -> bool:
        return self is not Algorithm.WIRTINGER_FLOW


class RunStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    FAILED = "failed"


@dataclass(frozen=True)
class SolverConfig:
    algorithm: Algorithm = Algorithm.POWER
    max_iters: int = 200
    rel_tol: float = 1e-10
    epsilon_guard: float = 1e-12
    power_steps: int = 1
    # "phi" (lambda_max of the lifted operator), "lemma2", or a fixed positive float
    d_strategy: Union[str, float] = "phi"
    wf_step: str = "heuristic"
    e_initial: float = 0.5
    accelerate: bool = False
    apply_init_scale: Optional[bool] = None

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be >= 1")
        if not self.rel_tol >= 0:
            raise InvalidArgumentError("rel_tol must be >= 0")
        if not self.epsilon_guard > 0:
            raise InvalidArgumentError("epsilon_guard must be > 0")
        if self.power_steps < 1:
            raise InvalidArgumentError("power_steps must be >= 1")
        if self.wf_step not in ("heuristic", "backtracking"):
            raise InvalidArgumentError(f"unknown wf_step {self.wf_step!r}")
        if not self.e_initial > 0:
            raise InvalidArgumentError("e_initial must be > 0")
        if isinstance(self.d_strategy, str):
            if self.d_strategy not in ("phi", "lemma2"):
                raise InvalidArgumentError(f"unknown d_strategy {self.d_strategy!r}")
        elif not float(self.d_strategy) > 0:
            raise InvalidArgumentError("a fixed D must be positive")

    @property
    def scale_init(self) -> bool:
        if self.apply_init_scale is None:
            return self.algorithm is Algorithm.WIRTINGER_FLOW
        return self.apply_init_scale

    @property
    def label(self) -> str:
        """Short identifier used in tables, e.g. ``power-acce``."""
        if self.accelerate and self.algorithm.mm:
            return f"{self.algorithm.value}-acce"
        return self.algorithm.value


@dataclass
class SolverRun:
    final_x: np.ndarray
    objective_trace: List[float]
    iterations_used: int
    status: RunStatus
    wall_time: float
    failure_reason: Optional[str] = None
    inner_loop_counts: List[int] = field(default_factory=list)
    squared_trace: List[float] = field(default_factory=list)
    modulus_trace: List[float] = field(default_factory=list)
    step_calls: int = 0

    @property
    def final_objective(self) -> float:
        return self.objective_trace[-1]


def native_objective(algorithm: Algorithm):
    return objective_squared if Algorithm(algorithm).squared_family else objective_modulus


def guarded_phase(z, eps: float = 1e-12) -> np.ndarray:
    """``z / |z|`` elementwise, with 1 wherever ``|z| < eps``."""
    mag = np.abs(z)
    small = mag < eps
    return np.where(small, 1.0 + 0j, z / np.where(small, 1.0, mag))


def _eps(cfg) -> float:
    return 1e-12 if cfg is None else cfg.epsilon_guard


# ---------------------------------------------------------------- baselines

def wf_step_size(k: int, lam_sq: float) -> float:
    """Heuristic Wirtinger Flow step ``lam^2 min(1 - exp(-(k+1)/330), 0.4)``."""
    return lam_sq * min(1.0 - math.exp(-(k + 1) / 330.0), 0.4)


def _wf_update(P: ProblemInstance, x, cfg: SolverConfig, k: int):
    grad = gradient_squared(P, x)
    gnorm_sq = float(np.real(np.vdot(grad, grad)))
    if gnorm_sq == 0.0:
        return x, False
    mu = wf_step_size(k, P.init_scale.lam**2)
    if cfg.wf_step == "heuristic":
        return x - mu * grad, False
    f0 = objective_squared(P, x)
    for _ in range(MAX_HALVINGS + 1):
        candidate = x - mu * grad
        if objective_squared(P, candidate) <= f0 - 0.5 * mu * gnorm_sq:
            return candidate, False
        mu *= 0.5
    return x, True


def step_wirtinger_flow(P: ProblemInstance, x, cfg: SolverConfig, k: int) -> np.ndarray:
    """Gradient step on the intensity loss; heuristic or Armijo-backtracked step size."""
    x_new, stalled = _wf_update(P, np.asarray(x, dtype=complex), cfg, k)
    if stalled:
        log.warning("Wirtinger Flow backtracking exhausted at iteration %d", k)
    return x_new


def step_gerchberg_saxton(P: ProblemInstance, x, cfg: Optional[SolverConfig] = None) -> np.ndarray:
    z = P.project(x)
    phase = np.exp(1j * np.angle(z))
    phase[np.abs(z) < _eps(cfg)] = 1.0
    return gram_solve(P.ensemble, phase * P.sqrt_y)


# ---------------------------------------------------------------- modulus MM

def step_modulus_single_term(P: ProblemInstance, x, cfg: Optional[SolverConfig] = None) -> np.ndarray:
    """Minimize ``sum_i |a_i^H x - c_i|^2`` with ``c_i = sqrt(y_i) phase(a_i^H x_k)``."""
    c = P.sqrt_y * guarded_phase(P.project(x), _eps(cfg))
    return gram_solve(P.ensemble, c)


def step_modulus_both_terms(P: ProblemInstance, x, cfg: Optional[SolverConfig] = None) -> np.ndarray:
    z = P.project(x)
    back = P.A @ (P.sqrt_y * guarded_phase(z, _eps(cfg)) - z)
    return x + back / lambda_max_gram(P.ensemble)


def eval_majorizer_modulus(P: ProblemInstance, x_candidate, x_anchor, eps: float = 1e-12) -> float:
    """Cauchy-Schwarz surrogate of the amplitude loss, constant ``sum y`` included."""
    zc = P.project(x_candidate)
    phase = guarded_phase(P.project(x_anchor), eps)
    cross = np.real(zc * phase.conj())
    return float(np.sum(np.abs(zc) ** 2 - 2.0 * P.sqrt_y * cross) + P.y.sum())


# ---------------------------------------------------------------- power MM

def lemma2_bound(P: ProblemInstance, x, raw: bool = False) -> float:
    """Lower bound on D making ``lambda_max(W) > |lambda_min(W)|``.

    ``sum_{i in I} s_i ||a_i||^2 / ||x||^2 + sum_i s_i |a_i^H x|^2 / ||x||^4``
    with ``s_i = |a_i^H x|^2 - y_i`` and ``I = {i : s_i > 0}``. Clamped at 0
    unless ``raw`` is set.
    """
    x = np.asarray(x, dtype=complex)
    nx2 = float(np.real(np.vdot(x, x)))
    if nx2 == 0.0:
        raise InvalidArgumentError("lemma2_bound needs a nonzero iterate")
    mag2 = np.abs(P.project(x)) ** 2
    s = mag2 - P.y
    over = s > 0
    value = float(np.sum(s[over] * P.column_norms_sq[over]) / nx2 + np.sum(s * mag2) / nx2**2)
    return value if raw else max(0.0, value)


def resolve_D(P: ProblemInstance, x, cfg: SolverConfig) -> float:
    strategy = cfg.d_strategy
    if strategy == "phi":
        return lambda_max_phi(P.ensemble)
    if strategy == "lemma2":
        floor = lambda_max_phi(P.ensemble) * 1e-6
        return 1.01 * max(lemma2_bound(P, x), floor)
    return float(strategy)


def build_W(P: ProblemInstance, x, D: float) -> np.ndarray:
    """``x x^H + (B - sum_i |a_i^H x|^2 a_i a_i^H) / D``."""
    if not D > 0:
        raise InvalidArgumentError("D must be positive")
    x = np.asarray(x, dtype=complex)
    mag2 = np.abs(P.project(x)) ** 2
    W = np.outer(x, x.conj()) + (P.B - (P.A * mag2) @ P.A.conj().T) / D
    return 0.5 * (W + W.conj().T)


def step_power(P: ProblemInstance, x, cfg: SolverConfig) -> np.ndarray:
    """``sqrt(max(0, rho)) u`` from ``cfg.power_steps`` power iterations on W.

    Warm-started at ``x / ||x||`` (all-ones when ``x`` is zero).
    """
    x = np.asarray(x, dtype=complex)
    if np.any(x):
        D, start = resolve_D(P, x, cfg), x
    else:
        # lemma2 is undefined at 0; W reduces to B / D there anyway
        D = lambda_max_phi(P.ensemble) if cfg.d_strategy == "lemma2" else resolve_D(P, x, cfg)
        start = np.ones(P.K)
    W = build_W(P, x, D)
    pair = power_iteration(W, cfg.power_steps, start)
    return math.sqrt(max(0.0, pair.value)) * pair.vector


def _majorizer_power(P: ProblemInstance, x, anchor, W, D: float, E: float):
    """Value of the combined power majorizer and the magnitude of its terms."""
    nx = float(np.linalg.norm(x))
    na = float(np.linalg.norm(anchor))
    WEa = W @ anchor + E * anchor
    cross = float(np.real(np.vdot(x, WEa)))
    quad = float(np.real(np.vdot(anchor, WEa)))
    za4 = float(np.sum(np.abs(P.project(anchor)) ** 4))
    y2 = float(P.y @ P.y)
    terms = (
        D * nx**4,
        2.0 * D * E * nx**2,
        -4.0 * D * (nx / na) * cross,
        2.0 * D * (nx**2 / na**2) * quad,
        D * na**4,
        -za4,
        y2,
    )
    return sum(terms), sum(abs(t) for t in terms)


def eval_majorizer_power(P: ProblemInstance, x_candidate, x_anchor, D: float, E: float) -> float:
    """Surrogate ``g(x | x_k)`` of the intensity loss after both majorization steps."""
    x_anchor = np.asarray(x_anchor, dtype=complex)
    if not np.any(x_anchor):
        raise InvalidArgumentError("majorizer anchor must be nonzero")
    W = build_W(P, x_anchor, D)
    return _majorizer_power(P, np.asarray(x_candidate, dtype=complex), x_anchor, W, D, E)[0]


def step_power_backtracking(P: ProblemInstance, x, cfg: SolverConfig):
    """One outer iteration with the doubling search on ``E``.

    Returns ``(x_next, inner_passes)``. A pass with ``d = 0`` counts as
    rejected.
    """
    x = np.asarray(x, dtype=complex)
    nx = np.linalg.norm(x)
    if nx == 0.0:
        raise InvalidArgumentError("power-bt step needs a nonzero iterate")
    D = resolve_D(P, x, cfg)
    W = build_W(P, x, D)
    xt = x / nx
    Wxt = W @ xt
    E = cfg.e_initial
    for passes in range(1, MAX_INNER_PASSES + 1):
        E *= 2.0
        d = Wxt + E * xt
        nd = np.linalg.norm(d)
        if nd == 0.0 or not np.isfinite(nd):
            continue
        xt_new = d / nd
        t = max(0.0, float(np.real(np.vdot(xt_new, W @ xt_new))))
        candidate = math.sqrt(t) * xt_new
        g, magnitude = _majorizer_power(P, candidate, x, W, D, E)
        # rounding floor: g and f agree to machine precision at a fixed point
        if g >= objective_squared(P, candidate) - 32 * np.finfo(float).eps * magnitude:
            return candidate, passes
    raise BacktrackingDivergedError(f"no valid E after {MAX_INNER_PASSES} passes")


# ---------------------------------------------------------------- driver

def make_step(P: ProblemInstance, cfg: SolverConfig):
    """Return ``step(x, k) -> x_next`` and a list collecting inner-pass counts."""
    algo = cfg.algorithm
    inner: List[int] = []
    stalled: List[int] = []

    if algo is Algorithm.WIRTINGER_FLOW:
        def step(x, k):
            x_new, stall = _wf_update(P, x, cfg, k)
            if stall:
                stalled.append(k)
            return x_new
    elif algo is Algorithm.GERCHBERG_SAXTON:
        def step(x, k):
            return step_gerchberg_saxton(P, x, cfg)
    elif algo is Algorithm.MODULUS_SINGLE_TERM:
        def step(x, k):
            return step_modulus_single_term(P, x, cfg)
    elif algo is Algorithm.MODULUS_BOTH_TERMS:
        def step(x, k):
            return step_modulus_both_terms(P, x, cfg)
    elif algo is Algorithm.POWER:
        def step(x, k):
            return step_power(P, x, cfg)
    else:
        def step(x, k):
            x_new, count = step_power_backtracking(P, x, cfg)
            inner.append(count)
            return x_new

    step.inner_counts = inner
    step.stalled = stalled
    return step


def solve(P: ProblemInstance, cfg: SolverConfig, x0=None) -> SolverRun:
    """Run one algorithm from spectral initialization (or ``x0``).

    Stops after ``cfg.max_iters`` outer iterations or once
    ``|f_k - f_{k+1}| <= rel_tol (1 + f_k)`` on the native objective.
    With ``cfg.accelerate`` every outer iteration of an MM algorithm is one
    safeguarded SQUAREM step; Wirtinger Flow ignores the flag.
    """
    cfg = cfg if isinstance(cfg, SolverConfig) else SolverConfig(**cfg)
    family_objective = native_objective(cfg.algorithm)

    def objective(v):
        return family_objective(P, v)

    t0 = time.perf_counter()
    if x0 is None:
        x = spectral_init(P, cfg.scale_init)
    else:
        x = np.array(x0, dtype=complex)
        if x.shape != (P.K,):
            raise InvalidArgumentError(f"x0 has shape {x.shape}, expected ({P.K},)")

    step = make_step(P, cfg)
    calls = [0]
    accelerate = cfg.accelerate and cfg.algorithm.mm

    def counted(x, k):
        calls[0] += 1
        return step(x, k)

    f = objective(x)
    trace = [f]
    sq_trace = [objective_squared(P, x)]
    mod_trace = [objective_modulus(P, x)]
    status = RunStatus.MAX_ITERS
    reason = None
    iterations = 0
    inner_counts: List[int] = []
    for k in range(cfg.max_iters):
        n_inner = len(step.inner_counts)
        try:
            # a diverging baseline overflows; caught below as a non-finite iterate
            with np.errstate(over="ignore", invalid="ignore"):
                if accelerate:
                    x_new = accel.accelerated_step(lambda v: counted(v, k), x, objective)
                else:
                    x_new = counted(x, k)
        except (DegenerateMatrixError, BacktrackingDivergedError, InvalidArgumentError) as exc:
            status, reason = RunStatus.FAILED, f"{type(exc).__name__}: {exc}"
            break
        if not np.all(np.isfinite(x_new)):
            status, reason = RunStatus.FAILED, "non-finite iterate"
            break
        if step.stalled:
            status, reason = RunStatus.FAILED, "backtracking-stalled"
            break
        if step.inner_counts[n_inner:]:
            inner_counts.append(int(sum(step.inner_counts[n_inner:])))
        x = x_new
        iterations += 1
        with np.errstate(over="ignore", invalid="ignore"):
            f_new = objective(x)
            sq_trace.append(objective_squared(P, x))
            mod_trace.append(objective_modulus(P, x))
        trace.append(f_new)
        if abs(f - f_new) <= cfg.rel_tol * (1.0 + f):
            status = RunStatus.CONVERGED
            break
        f = f_new

    return SolverRun(
        final_x=x,
        objective_trace=trace,
        iterations_used=iterations,
        status=status,
        wall_time=time.perf_counter() - t0,
        failure_reason=reason,
        inner_loop_counts=inner_counts,
        squared_trace=sq_trace,
        modulus_trace=mod_trace,
        step_calls=calls[0],
    )


def config(algorithm, **overrides) -> SolverConfig:
    """Shorthand: ``config("power", accelerate=True)``."""
    return replace(SolverConfig(algorithm=Algorithm(algorithm)), **overrides)
