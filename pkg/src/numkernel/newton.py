"""
Damped Newton ascent - shared maximizer for concave objectives with a feasible region
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)

# fgh(x) -> (value, gradient, hessian) of the objective to maximize
ObjectiveFGH = Callable[[np.ndarray], Tuple[float, np.ndarray, np.ndarray]]

HALVING = 0.5
MAX_HALVINGS = 50


@dataclass
class NewtonResult:
    x: np.ndarray
    value: float
    gradient: np.ndarray
    iterations: int
    converged: bool
    message: str
    degraded_steps: int = 0

    @property
    def gradient_norm(self) -> float:
        return float(np.max(np.abs(self.gradient))) if self.gradient.size else 0.0


def newton_direction(gradient: np.ndarray, hessian: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Solve (-H) d = g; least-squares direction when -H is not positive definite"""
    try:
        factor = scipy.linalg.cho_factor(-hessian)
        return scipy.linalg.cho_solve(factor, gradient), False
    except (np.linalg.LinAlgError, ValueError):
        direction, _, _, _ = scipy.linalg.lstsq(-hessian, gradient)
        return direction, True


def damped_newton(fgh: ObjectiveFGH, x0: np.ndarray, tol: float, max_iter: int,
                  feasible: Optional[Callable[[np.ndarray], bool]] = None,
                  on_accept: Optional[Callable[[np.ndarray], None]] = None,
                  max_halvings: int = MAX_HALVINGS, name: str = "newton") -> NewtonResult:
    """Maximize a concave objective by Newton steps with step halving.

    x0 must be feasible. A trial point is accepted once it is feasible and does
    not decrease the objective beyond roundoff; each halving multiplies the
    step by 0.5. Convergence is declared when the gradient sup-norm is <= tol.
    on_accept sees every accepted iterate and may raise to abort the solve.
    """
    feasible = feasible or (lambda x: True)
    x = np.array(x0, dtype=float)
    value, gradient, hessian = fgh(x)
    degraded = 0
    for iteration in range(max_iter + 1):
        if gradient.size == 0 or np.max(np.abs(gradient)) <= tol:
            logger.debug("%s converged in %d iterations", name, iteration)
            return NewtonResult(x, value, gradient, iteration, True, "converged", degraded)
        if iteration == max_iter:
            break
        direction, lost_curvature = newton_direction(gradient, hessian)
        if lost_curvature:
            degraded += 1
            logger.warning("%s: Hessian not negative definite at iteration %d; "
                           "using least-squares direction", name, iteration)
        slack = 1e-13 * (1.0 + abs(value))
        step = 1.0
        for _ in range(max_halvings + 1):
            candidate = x + step * direction
            if feasible(candidate):
                trial = fgh(candidate)
                if np.isfinite(trial[0]) and trial[0] >= value - slack:
                    break
            step *= HALVING
        else:
            return NewtonResult(x, value, gradient, iteration, False,
                                "step halving exhausted", degraded)
        x = candidate
        value, gradient, hessian = trial
        if on_accept is not None:
            on_accept(x)
    return NewtonResult(x, value, gradient, max_iter, False, "maximum iterations reached", degraded)
