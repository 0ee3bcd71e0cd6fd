"""Fast invariant checks runnable from an installed package (``primepr selftest``).

A reduced version of the test suite: a few seeds per property, seconds of
runtime. Each check returns ``(passed, detail)``.
"""
from __future__ import annotations

import numpy as np

from .linalg import lambda_max_gram, lambda_max_phi
from .metrics import aligned_squared_error, autocorrelation
from .problem import (
    complex_normal,
    gen_dft_ensemble,
    gen_gaussian_ensemble,
    gradient_squared,
    make_instance,
    objective_modulus,
    objective_squared,
)
from .solvers import (
    Algorithm,
    build_W,
    config,
    eval_majorizer_modulus,
    eval_majorizer_power,
    lemma2_bound,
    solve,
    step_gerchberg_saxton,
    step_modulus_single_term,
)


def _instance(seed, K=5, N=20, noise=0.0, dft=False):
    rng = np.random.default_rng(seed)
    x = complex_normal(rng, K)
    x /= np.linalg.norm(x)
    A = gen_dft_ensemble(K, N) if dft else gen_gaussian_ensemble(K, N, seed)
    return make_instance(A, x, noise, seed + 1), x


def check_spectral_identities():
    for K in range(1, 6):
        for N in range(K, 12):
            A = gen_dft_ensemble(K, N)
            if lambda_max_gram(A) != N or lambda_max_phi(A) != N * K:
                return False, f"DFT constants wrong at K={K}, N={N}"
    A = gen_gaussian_ensemble(3, 7, 1)
    M = A.matrix
    Phi = sum(np.outer(np.outer(a, a.conj()).ravel("F"), np.outer(a, a.conj()).ravel("F").conj()) for a in M.T)
    ref = np.linalg.eigvalsh(Phi)[-1]
    rel = abs(lambda_max_phi(A) - ref) / ref
    return rel < 1e-8, f"gaussian lambda_max(Phi) rel err {rel:.2e}"


def check_fixed_points():
    P, x = _instance(3, K=6, N=30)
    worst = 0.0
    for algo in Algorithm:
        run = solve(P, config(algo, max_iters=3), x0=x)
        worst = max(worst, np.max(np.abs(run.final_x - x)))
    return worst < 1e-10, f"max deviation {worst:.2e}"


def check_equivalence():
    P, _ = _instance(4, K=6, N=30)
    x = complex_normal(np.random.default_rng(9), 6)
    worst = 0.0
    for _ in range(30):
        a, b = step_gerchberg_saxton(P, x), step_modulus_single_term(P, x)
        worst = max(worst, np.max(np.abs(a - b)))
        x = a
    return worst < 1e-12, f"max entry gap {worst:.2e}"


def check_gradient():
    worst = 0.0
    for seed in range(5):
        P, _ = _instance(seed)
        x = complex_normal(np.random.default_rng(100 + seed), P.K)
        g = gradient_squared(P, x)
        h = 1e-5
        fd = np.empty(2 * P.K)
        for j in range(2 * P.K):
            e = np.zeros(P.K, dtype=complex)
            e[j % P.K] = h if j < P.K else 1j * h
            fd[j] = (objective_squared(P, x + e) - objective_squared(P, x - e)) / (2 * h)
        ref = np.concatenate([g.real, g.imag])
        worst = max(worst, np.linalg.norm(fd - ref) / np.linalg.norm(ref))
    return worst < 1e-6, f"max relative error {worst:.2e}"


def check_majorizers():
    rng = np.random.default_rng(11)
    P, _ = _instance(12, K=4, N=16, noise=1e-4)
    D = lambda_max_phi(P.ensemble)
    for _ in range(100):
        xa = complex_normal(rng, P.K)
        xc = xa + 0.3 * complex_normal(rng, P.K)
        if eval_majorizer_modulus(P, xc, xa) < objective_modulus(P, xc) - 1e-9:
            return False, "modulus majorizer below objective"
        E = max(1.0, -np.linalg.eigvalsh(build_W(P, xa, D))[0])
        if eval_majorizer_power(P, xc, xa, D, E) < objective_squared(P, xc) - 1e-9:
            return False, "power majorizer below objective"
    return True, "100 sampled pairs each"


def check_sign_bound():
    rng = np.random.default_rng(21)
    for seed in range(20):
        P, _ = _instance(seed, K=4, N=12, noise=1e-2)
        x = complex_normal(rng, P.K)
        D = 1.01 * max(lemma2_bound(P, x), 1e-9)
        ev = np.linalg.eigvalsh(build_W(P, x, D))
        if not ev[-1] > abs(ev[0]):
            return False, f"eigenvalue condition fails for seed {seed}"
    return True, "20 instances"


def check_descent():
    for seed in range(5):
        for dft in (False, True):
            P, _ = _instance(seed, K=10, N=50, noise=1e-4, dft=dft)
            for algo in (Algorithm.GERCHBERG_SAXTON, Algorithm.MODULUS_SINGLE_TERM,
                         Algorithm.MODULUS_BOTH_TERMS, Algorithm.POWER, Algorithm.POWER_BACKTRACKING):
                tr = np.asarray(solve(P, config(algo, max_iters=50)).objective_trace)
                if np.any(np.diff(tr) > 1e-10 * (1 + np.abs(tr[:-1]))):
                    return False, f"{algo.value} increased (seed {seed}, dft={dft})"
    return True, "5 seeds x 2 models x 5 algorithms"


def check_metrics():
    rng = np.random.default_rng(5)
    x = complex_normal(rng, 8)
    if aligned_squared_error(np.exp(1.3j) * x, x) > 1e-12:
        return False, "phase alignment"
    r = autocorrelation(x)
    if abs(r[0] - np.vdot(x, x)) > 1e-12:
        return False, "autocorrelation zero lag"
    flipped = autocorrelation(np.conj(x[::-1]))
    if np.max(np.abs(flipped.values - r.values)) > 1e-10:
        return False, "conjugate inversion invariance"
    return True, "alignment and autocorrelation identities"


CHECKS = {
    "spectral-identities": check_spectral_identities,
    "fixed-points": check_fixed_points,
    "gs-equivalence": check_equivalence,
    "gradient": check_gradient,
    "majorizers": check_majorizers,
    "sign-bound": check_sign_bound,
    "descent": check_descent,
    "metrics": check_metrics,
}


def run_selftest(stream=None):
    """Run every check; print one line each. Returns True when all pass."""
    ok = True
    for name, fn in CHECKS.items():
        try:
            passed, detail = fn()
        except Exception as exc:  # a crash is a failed check, not a crash of the runner
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name:20s} {detail}", file=stream)
    return ok
