"""Measurement models, measurement synthesis, objectives and spectral init."""
from __future__ import annotations

import threading
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import DegenerateInitError, InvalidArgumentError
from .linalg import leading_eigpair


class MatrixKind(str, Enum):
    GAUSSIAN = "gaussian"
    PARTIAL_DFT = "dft"


class MeasurementEnsemble:
    """The K x N measurement matrix ``A = [a_1, ..., a_N]`` and its cached constants.

    The matrix is stored read-only. Spectral constants and factorizations
    are computed at most once, under a lock, and then shared.
    """

    def __init__(self, matrix, kind, seed=None):
        matrix = np.array(matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.size == 0:
            raise InvalidArgumentError("measurement matrix must be a nonempty 2-D array")
        if not np.all(np.isfinite(matrix)):
            raise InvalidArgumentError("measurement matrix has non-finite entries")
        matrix.setflags(write=False)
        self.matrix = matrix
        self.kind = MatrixKind(kind)
        self.seed = seed
        self._cache = {}
        self._lock = threading.RLock()

    @property
    def K(self) -> int:
        return self.matrix.shape[0]

    @property
    def N(self) -> int:
        return self.matrix.shape[1]

    def cached(self, key, compute):
        with self._lock:
            if key not in self._cache:
                self._cache[key] = compute()
            return self._cache[key]

    @property
    def cached_lambda_gram(self) -> Optional[float]:
        return self._cache.get("lambda_gram")

    @property
    def cached_lambda_phi(self) -> Optional[float]:
        return self._cache.get("lambda_phi")

    def __repr__(self):
        return f"MeasurementEnsemble(kind={self.kind.value!r}, K={self.K}, N={self.N}, seed={self.seed})"


@dataclass(frozen=True)
class Measurements:
    values: np.ndarray
    noise_variance: float = 0.0
    clamped_count: int = 0
    seed: Optional[int] = None


@dataclass(frozen=True)
class InitScale:
    lam: float


class ProblemInstance:
    """Binds an ensemble to its intensity measurements ``y``.

    ``B = sum_i y_i a_i a_i^H`` and ``sqrt(y)`` are computed lazily and kept.
    """

    def __init__(self, ensemble: MeasurementEnsemble, measurements, ground_truth=None):
        if not isinstance(measurements, Measurements):
            measurements = Measurements(np.asarray(measurements, dtype=float))
        y = np.asarray(measurements.values, dtype=float)
        if y.shape != (ensemble.N,):
            raise InvalidArgumentError(f"{y.size} measurements for an ensemble with N={ensemble.N}")
        if np.any(y < 0) or not np.all(np.isfinite(y)):
            raise InvalidArgumentError("measurements must be finite and nonnegative")
        self.ensemble = ensemble
        self.measurements = measurements
        self.ground_truth = None if ground_truth is None else np.asarray(ground_truth, dtype=complex)

    @property
    def A(self) -> np.ndarray:
        return self.ensemble.matrix

    @property
    def y(self) -> np.ndarray:
        return np.asarray(self.measurements.values, dtype=float)

    @property
    def K(self) -> int:
        return self.ensemble.K

    @property
    def N(self) -> int:
        return self.ensemble.N

    @cached_property
    def sqrt_y(self) -> np.ndarray:
        return np.sqrt(self.y)

    @cached_property
    def B(self) -> np.ndarray:
        A = self.A
        B = (A * self.y) @ A.conj().T
        return 0.5 * (B + B.conj().T)

    @cached_property
    def column_norms_sq(self) -> np.ndarray:
        return np.sum(np.abs(self.A) ** 2, axis=0)

    @cached_property
    def init_scale(self) -> InitScale:
        """``lambda^2 = K sum(y) / sum ||a_i||^2`` from the Wirtinger Flow recipe."""
        lam_sq = self.K * self.y.sum() / self.column_norms_sq.sum()
        return InitScale(float(np.sqrt(lam_sq)))

    def project(self, x) -> np.ndarray:
        """Inner products ``a_i^H x`` for all i."""
        return self.A.conj().T @ x


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Complex array with independent standard normal real and imaginary parts."""
    parts = rng.standard_normal((2,) + tuple(np.atleast_1d(shape)))
    return parts[0] + 1j * parts[1]


def gen_gaussian_ensemble(K: int, N: int, seed: int) -> MeasurementEnsemble:
    if K < 1 or N < 1:
        raise InvalidArgumentError("K and N must be positive")
    rng = np.random.default_rng(seed)
    return MeasurementEnsemble(complex_normal(rng, (K, N)), MatrixKind.GAUSSIAN, seed=seed)


def gen_dft_ensemble(K: int, N: int) -> MeasurementEnsemble:
    """First K rows of the N x N DFT matrix, ``[a_i]_k = exp(j 2 pi k i / N)`` (0-based)."""
    if K < 1 or N < 1:
        raise InvalidArgumentError("K and N must be positive")
    if K > N:
        raise InvalidArgumentError(f"partial DFT needs K <= N, got K={K}, N={N}")
    k = np.arange(K)[:, None]
    i = np.arange(N)[None, :]
    # reduce the exponent mod N first so equal angles give bitwise equal entries
    matrix = np.exp(2j * np.pi * ((k * i) % N) / N)
    ens = MeasurementEnsemble(matrix, MatrixKind.PARTIAL_DFT)
    ens.cached("lambda_gram", lambda: float(N))
    ens.cached("lambda_phi", lambda: float(N * K))
    return ens


def synthesize(A: MeasurementEnsemble, x, noise_variance: float = 0.0, seed=None) -> Measurements:
    """Intensities ``y_i = max(0, |a_i^H x|^2 + n_i)`` with real Gaussian ``n_i``."""
    x = np.asarray(x, dtype=complex)
    if x.shape != (A.K,):
        raise InvalidArgumentError(f"signal has shape {x.shape}, expected ({A.K},)")
    if noise_variance < 0:
        raise InvalidArgumentError("noise_variance must be nonnegative")
    values = np.abs(A.matrix.conj().T @ x) ** 2
    clamped = 0
    if noise_variance > 0:
        rng = np.random.default_rng(seed)
        values = values + np.sqrt(noise_variance) * rng.standard_normal(A.N)
        negative = values < 0
        clamped = int(negative.sum())
        values[negative] = 0.0
    return Measurements(values, float(noise_variance), clamped, seed)


def make_instance(A: MeasurementEnsemble, x_o, noise_variance=0.0, seed=None) -> ProblemInstance:
    return ProblemInstance(A, synthesize(A, x_o, noise_variance, seed), ground_truth=x_o)


def objective_squared(P: ProblemInstance, x) -> float:
    """Intensity least-squares loss ``sum_i (y_i - |a_i^H x|^2)^2``."""
    r = P.y - np.abs(P.project(x)) ** 2
    return float(r @ r)


def objective_modulus(P: ProblemInstance, x) -> float:
    """Amplitude loss ``sum_i (sqrt(y_i) - |a_i^H x|)^2``."""
    r = P.sqrt_y - np.abs(P.project(x))
    return float(r @ r)


def gradient_squared(P: ProblemInstance, x) -> np.ndarray:
    """Wirtinger gradient ``4 sum_i (|a_i^H x|^2 - y_i) a_i (a_i^H x)``.

    Its real and imaginary parts are the partial derivatives of
    :func:`objective_squared` with respect to ``Re x`` and ``Im x``.
    """
    z = P.project(x)
    return 4.0 * (P.A @ ((np.abs(z) ** 2 - P.y) * z))


def spectral_init(P: ProblemInstance, apply_scale: bool = False) -> np.ndarray:
    """Leading eigenvector of ``sum_i y_i a_i a_i^H``, optionally scaled by lambda."""
    if not np.any(P.y > 0):
        raise DegenerateInitError("all measurements are zero")
    pair = leading_eigpair(P.B, tol=1e-10)
    x = pair.vector
    if apply_scale:
        x = P.init_scale.lam * x
    return x
