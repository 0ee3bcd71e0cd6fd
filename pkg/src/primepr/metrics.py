"""Recovery metrics: global-phase alignment, squared error, autocorrelation."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError

GAUSSIAN_THRESHOLD = 1e-4
AUTOCORR_THRESHOLD = 1e-8


class Setting(str, Enum):
    GAUSSIAN_DIRECT = "gaussian"
    DFT_AUTOCORR = "dft"


@dataclass(frozen=True)
class Autocorrelation:
    """Lags ``m = -(K-1) .. K-1`` stored in ``values[m + K - 1]``."""

    values: np.ndarray

    @property
    def K(self) -> int:
        return (self.values.size + 1) // 2

    def __getitem__(self, m: int) -> complex:
        if not -(self.K - 1) <= m <= self.K - 1:
            raise IndexError(m)
        return self.values[m + self.K - 1]


@dataclass(frozen=True)
class RecoveryReport:
    phase_shift_phi: float
    aligned_squared_error: float
    success: bool
    threshold: float
    autocorr_squared_error: Optional[float] = None
    autocorr_success: Optional[bool] = None
    autocorr_threshold: Optional[float] = None


def _pair(x_star, x_o):
    x_star = np.asarray(x_star, dtype=complex).ravel()
    x_o = np.asarray(x_o, dtype=complex).ravel()
    if x_star.shape != x_o.shape:
        raise InvalidArgumentError(f"length mismatch: {x_star.size} vs {x_o.size}")
    return x_star, x_o


def align_phase(x_star, x_o) -> float:
    """Angle ``phi`` minimizing ``||x_star - x_o e^{j phi}||^2``, i.e. ``arg(x_o^H x_star)``.

    Returns 0 when the two vectors are (numerically) orthogonal, where every
    angle is a minimizer.
    """
    x_star, x_o = _pair(x_star, x_o)
    inner = np.vdot(x_o, x_star)
    if abs(inner) < 1e-15:
        return 0.0
    return float(np.angle(inner))


def aligned_squared_error(x_star, x_o) -> float:
    x_star, x_o = _pair(x_star, x_o)
    phi = align_phase(x_star, x_o)
    diff = x_star - x_o * np.exp(1j * phi)
    return float(np.real(np.vdot(diff, diff)))


def autocorrelation(x) -> Autocorrelation:
    """Aperiodic autocorrelation ``r[m] = sum_i x[i] conj(x[i - m])``, zero padded."""
    x = np.asarray(x, dtype=complex).ravel()
    return Autocorrelation(np.correlate(x, x, mode="full"))


def classify(x_star, x_o, setting=Setting.GAUSSIAN_DIRECT, threshold: Optional[float] = None) -> RecoveryReport:
    """Score a recovered signal against the ground truth.

    ``gaussian``: success when the phase-aligned squared error is below
    ``threshold`` (default 1e-4). ``dft``: signals are identifiable only up
    to their autocorrelation, so success compares autocorrelations against
    ``threshold`` (default 1e-8); the aligned error is still reported.
    """
    setting = Setting(setting)
    x_star, x_o = _pair(x_star, x_o)
    phi = align_phase(x_star, x_o)
    err = aligned_squared_error(x_star, x_o)
    if setting is Setting.GAUSSIAN_DIRECT:
        thr = GAUSSIAN_THRESHOLD if threshold is None else threshold
        return RecoveryReport(phi, err, err < thr, thr)
    thr = AUTOCORR_THRESHOLD if threshold is None else threshold
    dr = autocorrelation(x_o).values - autocorrelation(x_star).values
    ac_err = float(np.real(np.vdot(dr, dr)))
    return RecoveryReport(phi, err, err < GAUSSIAN_THRESHOLD, GAUSSIAN_THRESHOLD,
                          ac_err, ac_err < thr, thr)
