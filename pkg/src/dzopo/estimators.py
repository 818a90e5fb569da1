"""Zeroth-order gradient estimators and the smoothed-objective oracle.

All estimators scale a Gaussian exploration direction by a finite-difference
quotient of function values; they are unbiased for the gradient of the
Gaussian-smoothed objective E_u[f(theta + delta u)].
"""

from __future__ import annotations

from enum import Enum

import numpy as np


class EstimatorKind(str, Enum):
    ONE_POINT = "one_point"
    TWO_POINT = "two_point"
    RESIDUAL = "residual"


def _check_delta(delta: float) -> None:
    if delta <= 0:
        raise ValueError(f"delta must be > 0, got {delta}")


def one_point(value: float, delta: float, u: np.ndarray) -> np.ndarray:
    """(value / delta) * u."""
    _check_delta(delta)
    return (value / delta) * np.asarray(u, dtype=float)


def two_point(value_plus: float, value_minus: float, delta: float, u: np.ndarray) -> np.ndarray:
    """((value_plus - value_minus) / (2 delta)) * u.

    Both values must come from the same direction u; symmetric perturbation
    additionally assumes common evaluation noise for the two rollouts.
    """
    _check_delta(delta)
    return ((value_plus - value_minus) / (2.0 * delta)) * np.asarray(u, dtype=float)


def residual(value_curr: float, value_prev: float, delta: float, u: np.ndarray) -> np.ndarray:
    """((value_curr - value_prev) / delta) * u.

    One evaluation per iteration; the previous iteration's value acts as a
    baseline that cancels most of the shared magnitude, cutting variance.
    """
    _check_delta(delta)
    return ((value_curr - value_prev) / delta) * np.asarray(u, dtype=float)


def local_update_direction(mu_curr: float, mu_prev: float, delta: float, u_i: np.ndarray) -> np.ndarray:
    """Agent-local block of the decentralized residual estimator.

    mu_curr and mu_prev are the agent's consensus estimates of the global
    return for the current and previous episodes. Under exact consensus,
    stacking these blocks over all agents reproduces ``residual`` exactly.
    """
    _check_delta(delta)
    return ((mu_curr - mu_prev) / delta) * np.asarray(u_i, dtype=float)


def smoothed_value_oracle(f, theta: np.ndarray, delta: float, n_samples: int, seed) -> tuple:
    """Monte-Carlo estimate of the smoothed objective E_u[f(theta + delta u)].

    Returns (estimate, standard_error). Verification oracle only; not used
    by the optimizer.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    _check_delta(delta)
    theta = np.asarray(theta, dtype=float)
    rng = np.random.default_rng(seed)
    points = theta[None, :] + delta * rng.standard_normal((n_samples, theta.size))
    try:
        values = np.asarray(f(points), dtype=float)
        if values.shape != (n_samples,):
            raise TypeError
    except (TypeError, ValueError):
        # f only evaluates single points; fall back to a per-sample loop.
        values = np.array([f(p) for p in points])
    estimate = float(values.mean())
    stderr = float(values.std(ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else float("inf")
    return estimate, stderr
