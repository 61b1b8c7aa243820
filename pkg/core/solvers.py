# -*- coding: utf-8 -*-
"""
core/solvers.py

Maximizer for smooth concave functions over a box {x >= lower} intersected
with an open convex domain (here: positive definiteness of a matrix factor).

The default method is the active-set projected Newton iteration: coordinates
sitting on their bound with a descending gradient are moved along the
gradient (and clipped), the remaining ones take a damped Newton step. Steps
are accepted by Armijo backtracking along the projection arc; a trial point
outside the domain (the objective returns ``None``) is treated as a failed
step, which keeps every iterate strictly inside the domain.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from core.errors import InfeasibleStartError

logger = logging.getLogger(__name__)

ARMIJO_PARAMETER = 1e-4
BACKTRACK_FACTOR = 0.5
MIN_STEP = 1e-20
ACTIVE_SET_WIDTH = 1e-6

ValueFn = Callable[[np.ndarray], Optional[float]]
VectorFn = Callable[[np.ndarray], np.ndarray]


@dataclass
class SolverResult:
    """Outcome of a bounded maximization."""
    x: np.ndarray
    value: float
    iterations: int
    converged: bool
    kkt_residual: float


def kkt_residual(x: np.ndarray, gradient: np.ndarray,
                 lower: np.ndarray) -> float:
    """Infinity norm of x - P(x + gradient), zero exactly at KKT points."""
    if x.size == 0:
        return 0.0
    projected = np.maximum(lower, x + gradient)
    return float(np.max(np.abs(projected - x)))


def _newton_direction(gradient: np.ndarray,
                      hessian: np.ndarray) -> Optional[np.ndarray]:
    """
    Solve (-H + mu I) d = g for an ascent direction, raising the damping mu
    until the factorization succeeds.
    """
    curvature = -hessian
    scale = max(1.0, float(np.max(np.abs(np.diag(curvature)))))
    damping = 1e-12 * scale
    identity = np.eye(curvature.shape[0])
    for _ in range(8):
        try:
            factor = scipy.linalg.cho_factor(curvature + damping * identity,
                                             lower=True)
        except np.linalg.LinAlgError:
            damping *= 100.0
            continue
        direction = scipy.linalg.cho_solve(factor, gradient)
        if np.all(np.isfinite(direction)) and gradient @ direction > 0:
            return direction
        damping *= 100.0
    return None


def maximize_bounded(value_fn: ValueFn,
                     gradient_fn: VectorFn,
                     x0: np.ndarray,
                     lower: np.ndarray,
                     *,
                     hessian_fn: Optional[VectorFn] = None,
                     tolerance: float = 1e-7,
                     max_iterations: int = 200,
                     method: str = 'newton',
                     name: str = 'subproblem') -> SolverResult:
    """
    Maximize a concave function subject to x >= lower.

    Args:
        value_fn: Objective; returns None outside the open domain.
        gradient_fn: Gradient of the objective.
        x0: Feasible starting point.
        lower: Elementwise lower bounds.
        hessian_fn: Hessian, required for ``method='newton'``.
        tolerance: Stop once the projected-gradient residual is below it.
        max_iterations: Iteration cap; on reaching it the best iterate is
            returned with ``converged=False``.
        method: ``'newton'`` or ``'gradient'``.
        name: Label used in log messages.

    Returns:
        SolverResult: The final iterate and diagnostics.

    Raises:
        InfeasibleStartError: ``x0`` violates the bounds or the domain.
    """
    if method not in ('newton', 'gradient'):
        raise ValueError("Unknown solver method '%s'." % method)
    if method == 'newton' and hessian_fn is None:
        raise ValueError("method='newton' requires hessian_fn.")

    x = np.array(x0, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), x.shape)
    if np.any(x < lower):
        raise InfeasibleStartError("%s: starting point violates its lower "
                                   "bounds." % name)
    value = value_fn(x)
    if value is None or not np.isfinite(value):
        raise InfeasibleStartError("%s: starting point is outside the "
                                   "feasible domain." % name)

    gradient = gradient_fn(x)
    residual = kkt_residual(x, gradient, lower)
    step = 1.0
    iterations = 0
    stalled = False
    while residual > tolerance and iterations < max_iterations:
        iterations += 1
        active = (x - lower <= min(ACTIVE_SET_WIDTH, residual)) & (gradient < 0)
        free = ~active

        direction = np.where(active, gradient, 0.0)
        free_direction = None
        if method == 'newton' and free.any():
            hessian = hessian_fn(x)
            free_direction = _newton_direction(gradient[free],
                                               hessian[np.ix_(free, free)])
            step = 1.0
        if free_direction is None:
            free_direction = gradient[free]
        direction[free] = free_direction
        predicted = gradient[free] @ free_direction

        accepted = False
        while step >= MIN_STEP:
            trial = np.maximum(lower, x + step * direction)
            trial_value = value_fn(trial)
            if trial_value is not None and np.isfinite(trial_value):
                increase = (step * predicted +
                            gradient[active] @ (trial[active] - x[active]))
                if trial_value - value >= ARMIJO_PARAMETER * increase \
                        and trial_value >= value:
                    accepted = True
                    break
            step *= BACKTRACK_FACTOR
        if not accepted:
            # no representable ascent left: the iterate is optimal to
            # working precision
            logger.debug("%s: line search stalled at residual %.3e.", name,
                         residual)
            stalled = True
            break

        x, value = trial, trial_value
        gradient = gradient_fn(x)
        residual = kkt_residual(x, gradient, lower)
        if method == 'gradient':
            step = min(step * 2.0, 1e6)

    converged = residual <= tolerance or stalled
    if not converged:
        logger.warning(
            "%s: stopped after %d iterations with KKT residual %.3e "
            "(tolerance %.1e).", name, iterations, residual, tolerance)
    return SolverResult(x=x,
                        value=float(value),
                        iterations=iterations,
                        converged=converged,
                        kkt_residual=residual)
