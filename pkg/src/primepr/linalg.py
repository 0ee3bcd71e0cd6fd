"""Dense complex linear-algebra kernels shared by the solvers.

Hermitian leading-eigenpair estimation by power iteration, Gram-matrix
solves against ``A A^H`` and the matrix-free product with the lifted
operator ``Phi = sum_i vec(a_i a_i^H) vec(a_i a_i^H)^H``.

Functions taking an ensemble only rely on its ``matrix``, ``kind`` and
``cached`` members, see :class:`primepr.problem.MeasurementEnsemble`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import scipy.linalg

from .errors import DegenerateMatrixError, InvalidArgumentError, SingularGramError

Operator = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]

PARTIAL_DFT = "dft"


@dataclass(frozen=True)
class EigPair:
    value: float
    vector: np.ndarray
    steps: int = 0
    converged: bool = True


def _as_matvec(M: Operator, n: int) -> Callable[[np.ndarray], np.ndarray]:
    if callable(M):
        return M
    M = np.asarray(M)
    if M.shape != (n, n):
        raise InvalidArgumentError(f"operator shape {M.shape} does not match start length {n}")
    return lambda v: M @ v


def _unit_start(start, n=None) -> np.ndarray:
    if start is None:
        if n is None:
            raise InvalidArgumentError("start vector or dimension required")
        return np.full(n, 1.0 / np.sqrt(n), dtype=complex)
    v = np.asarray(start, dtype=complex).ravel()
    norm = np.linalg.norm(v)
    if v.size == 0 or norm == 0.0:
        raise InvalidArgumentError("power iteration needs a nonzero start vector")
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError("start vector has non-finite entries")
    return v / norm


def power_iteration(M: Operator, steps: int, start) -> EigPair:
    """Run ``steps`` power-method iterations from ``start``.

    Parameters
    ----------
    M : ndarray or callable
        Hermitian matrix, or a function computing ``M @ v``.
    steps : int
        Number of applications of ``M``.
    start : array_like
        Nonzero start vector, normalized internally.

    Returns
    -------
    EigPair
        The normalized iterate and its Rayleigh quotient ``u^H M u``.
    """
    if steps < 1:
        raise InvalidArgumentError("steps must be a positive integer")
    u = _unit_start(start)
    matvec = _as_matvec(M, u.size)
    for step in range(1, steps + 1):
        w = matvec(u)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            raise DegenerateMatrixError(step)
        u = w / norm
    rho = float(np.real(np.vdot(u, matvec(u))))
    return EigPair(rho, u, steps, True)


def leading_eigpair(M: Operator, tol: float = 1e-10, max_steps: int = 10_000, start=None) -> EigPair:
    """Iterate the power method until the eigen-residual is below ``tol``.

    Convergence is declared once ``|rho_k - rho_{k-1}|`` and the residual
    ``||M u - rho u||`` are both at most ``tol * max(1, |rho|)``. The
    residual test bounds the eigenvector error by ``tol`` over the spectral
    gap, which a Rayleigh-quotient test alone does not. Hitting
    ``max_steps`` returns the last iterate with ``converged=False``.
    """
    if not tol > 0:
        raise InvalidArgumentError("tol must be positive")
    if max_steps < 1:
        raise InvalidArgumentError("max_steps must be a positive integer")
    if start is None and not callable(M):
        start = np.ones(np.asarray(M).shape[0])
    u = _unit_start(start)
    matvec = _as_matvec(M, u.size)

    w = matvec(u)
    rho = float(np.real(np.vdot(u, w)))
    for step in range(1, max_steps + 1):
        norm = np.linalg.norm(w)
        if norm == 0.0:
            raise DegenerateMatrixError(step)
        u = w / norm
        w = matvec(u)
        rho_new = float(np.real(np.vdot(u, w)))
        scale = tol * max(1.0, abs(rho_new))
        if abs(rho_new - rho) <= scale and np.linalg.norm(w - rho_new * u) <= scale:
            return EigPair(rho_new, u, step, True)
        rho = rho_new
    return EigPair(rho, u, max_steps, False)


def _gram_factor(A):
    G = A.matrix @ A.matrix.conj().T
    G = 0.5 * (G + G.conj().T)
    K = G.shape[0]
    try:
        c, lower = scipy.linalg.cho_factor(G, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularGramError("A A^H is not positive definite (rank deficient ensemble)") from exc
    pivots = np.abs(np.diag(c)) ** 2
    floor = 1e-12 * np.real(np.trace(G)) / K
    if np.any(pivots < floor):
        raise SingularGramError(f"Gram pivot {pivots.min():.3e} below {floor:.3e}")
    return c, lower


def gram_solve(A, b) -> np.ndarray:
    """Least-squares solution ``x = (A A^H)^{-1} A b`` of ``min ||A^H x - b||``.

    The Cholesky factor of ``A A^H`` is computed on first use and cached on
    the ensemble. Partial-DFT ensembles use ``A A^H = N I`` directly.
    """
    M = A.matrix
    K, N = M.shape
    b = np.asarray(b, dtype=complex)
    if b.shape != (N,):
        raise InvalidArgumentError(f"right-hand side has shape {b.shape}, expected ({N},)")
    if A.kind == PARTIAL_DFT:
        return (M @ b) / N
    if K > N:
        raise SingularGramError(f"ensemble with K={K} > N={N} has no full row rank")
    factor = A.cached("gram_cholesky", lambda: _gram_factor(A))
    return scipy.linalg.cho_solve(factor, M @ b, check_finite=False)


def lambda_max_gram(A) -> float:
    """Largest eigenvalue of ``A A^H``; exactly ``N`` for partial DFT."""
    if A.kind == PARTIAL_DFT:
        return A.cached("lambda_gram", lambda: float(A.matrix.shape[1]))

    def compute():
        M = A.matrix
        return leading_eigpair(lambda v: M @ (M.conj().T @ v), tol=1e-10,
                               start=np.ones(M.shape[0])).value

    return A.cached("lambda_gram", compute)


def phi_matvec(A, V) -> np.ndarray:
    """Apply the lifted operator to a K x K matrix without forming it.

    Returns ``sum_i (a_i^H V a_i) a_i a_i^H`` in O(N K^2).
    """
    M = A.matrix
    K = M.shape[0]
    V = np.asarray(V, dtype=complex)
    if V.shape != (K, K):
        raise InvalidArgumentError(f"V has shape {V.shape}, expected ({K}, {K})")
    q = np.einsum("ki,ki->i", M.conj(), V @ M)
    return (M * q) @ M.conj().T


def lambda_max_phi(A) -> float:
    """Largest eigenvalue of the lifted operator; exactly ``N K`` for partial DFT."""
    K, N = A.matrix.shape
    if A.kind == PARTIAL_DFT:
        return A.cached("lambda_phi", lambda: float(N * K))

    def compute():
        def matvec(v):
            return phi_matvec(A, v.reshape(K, K, order="F")).ravel(order="F")

        start = np.eye(K).ravel(order="F")
        return leading_eigpair(matvec, tol=1e-10, start=start).value

    return A.cached("lambda_phi", compute)
