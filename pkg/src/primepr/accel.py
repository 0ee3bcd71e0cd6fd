"""Safeguarded squared extrapolation (SQUAREM) for fixed-point MM maps."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import PrimeError


@dataclass(frozen=True)
class AccelState:
    base_point: np.ndarray
    first_step: np.ndarray
    second_step: np.ndarray
    steplength_alpha: float


def squarem_state(step_fn: Callable[[np.ndarray], np.ndarray], x) -> AccelState:
    """Two plain steps from ``x`` and the clamped steplength ``-||r|| / ||v||``."""
    x1 = step_fn(x)
    x2 = step_fn(x1)
    r = x1 - x
    v = x2 - x1 - r
    nv = np.linalg.norm(v)
    if nv == 0.0:
        alpha = -1.0
    else:
        alpha = min(-np.linalg.norm(r) / nv, -1.0)
    return AccelState(x, x1, x2, float(alpha))


def accelerated_step(step_fn, x, objective_fn):
    """One SQUAREM outer iteration around the MM update ``step_fn``.

    The extrapolated point ``x - 2 alpha r + alpha^2 v`` is pushed through one
    more MM step. That candidate is kept only if it does not increase
    ``objective_fn`` relative to ``x``; otherwise the plain double step is
    returned, so the objective sequence stays monotone.
    """
    state = squarem_state(step_fn, x)
    if state.steplength_alpha == -1.0:
        return state.second_step
    alpha = state.steplength_alpha
    r = state.first_step - x
    v = state.second_step - state.first_step - r
    x_prime = x - 2.0 * alpha * r + alpha**2 * v
    try:
        candidate = step_fn(x_prime)
    except PrimeError:
        return state.second_step
    if not np.all(np.isfinite(candidate)):
        return state.second_step
    if objective_fn(candidate) <= objective_fn(x):
        return candidate
    return state.second_step
