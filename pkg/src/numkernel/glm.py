"""
Binary GLM fitting - logistic maximum likelihood with offsets, row weights and a link hook
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.special import expit, log_expit

from src.errors import ConvergenceError, SeparationError, StructuralError
from src.numkernel.design import DesignMatrix
from src.numkernel.linalg import RANK_TOL, detect_redundancy
from src.numkernel.newton import damped_newton
from src.utils import column_rms

logger = logging.getLogger(__name__)

SCORE_TOL = 1e-10
MAX_ITER = 100
POLISH_ITER = 5
ETA_CAP = 30.0

Vectorized = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BinaryLink:
    """Inverse link Π with its derivative and log-probabilities; links must be symmetric, Π(-η) = 1 - Π(η)"""

    name: str
    inverse: Vectorized
    derivative: Vectorized
    log_cdf: Vectorized
    eta_cap: float = ETA_CAP

    def log_sf(self, eta: np.ndarray) -> np.ndarray:
        return self.log_cdf(-eta)

    def rho(self, eta: np.ndarray) -> np.ndarray:
        """Π'(η) / {Π(η)(1 - Π(η))}; identically 1 for the logistic link"""
        return self.derivative(eta) / (self.inverse(eta) * self.inverse(-eta))


LOGISTIC = BinaryLink(
    name="logistic",
    inverse=expit,
    derivative=lambda eta: expit(eta) * expit(-eta),
    log_cdf=log_expit,
)


@dataclass(frozen=True)
class LogisticFit:
    """γ̂ on every design column (zero where dropped) and the fitted probabilities"""

    coefficients: np.ndarray
    fitted_probabilities: np.ndarray
    linear_predictor: np.ndarray
    converged: bool
    iterations: int
    max_score_residual: float
    retained: Tuple[int, ...]
    dropped_columns: Tuple[str, ...]
    link: str = "logistic"
    scaled_score_residual: float = 0.0


def check_treatment(t: np.ndarray, n: Optional[int] = None) -> np.ndarray:
    """Validate a binary treatment vector with both classes present"""
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or (n is not None and t.shape[0] != n):
        raise StructuralError(f"Treatment vector has shape {t.shape}, expected ({n},)")
    if not np.all((t == 0) | (t == 1)):
        bad = int(np.flatnonzero((t != 0) & (t != 1))[0])
        raise StructuralError(f"Treatment must be 0/1; row {bad} has {t[bad]}")
    if t.sum() == 0 or t.sum() == t.shape[0]:
        raise StructuralError("Both treatment classes must be present")
    return t


def fit_logistic(A: DesignMatrix, t: np.ndarray, offset: Optional[np.ndarray] = None,
                 tol: float = SCORE_TOL, max_iter: int = MAX_ITER,
                 weights: Optional[np.ndarray] = None, link: BinaryLink = LOGISTIC,
                 rank_tol: float = RANK_TOL) -> LogisticFit:
    """Maximum likelihood for P(T=1|X) = Π(offset + A γ) by Fisher scoring with step halving.

    For the logistic link Fisher scoring is Newton's method. Redundant columns
    are dropped first and get coefficient 0. Iterations run on columns scaled
    to unit root mean square and stop once the scaled score is within tol;
    max_score_residual is max |Ẽ[w (T - π) ρ a(X)]| on the raw retained
    columns, and a few polishing steps bring it within tol when large columns
    inflate it. Accepted iterates with |linear predictor| above the link's cap
    raise SeparationError.
    """
    t = check_treatment(t, A.n_rows)
    n = A.n_rows
    offset = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
    weights = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    retained = detect_redundancy(A, rank_tol)
    dropped = tuple(label for i, label in enumerate(A.labels) if i not in retained)
    if dropped:
        logger.info("Binary regression dropped redundant columns %s", dropped)
    X = A.values[:, list(retained)]
    scale = column_rms(X)
    Xs = X / scale

    def fgh(beta):
        eta = offset + Xs @ beta
        p, q = link.inverse(eta), link.inverse(-eta)
        dp = link.derivative(eta)
        value = np.mean(weights * (t * link.log_cdf(eta) + (1 - t) * link.log_sf(eta)))
        score_weight = weights * (t - p) * dp / (p * q)
        info_weight = weights * dp * dp / (p * q)
        gradient = Xs.T @ score_weight / n
        hessian = -(Xs * info_weight[:, None]).T @ Xs / n
        return value, gradient, hessian

    def raw_residual(beta):
        eta = offset + Xs @ beta
        p, q = link.inverse(eta), link.inverse(-eta)
        score_weight = weights * (t - p) * link.derivative(eta) / (p * q)
        return float(np.max(np.abs(X.T @ score_weight / n))) if X.shape[1] else 0.0

    def check_separation(beta):
        eta = offset + Xs @ beta
        rows = np.flatnonzero(np.abs(eta) > link.eta_cap)
        if rows.size:
            raise SeparationError(rows)

    check_separation(np.zeros(Xs.shape[1]))
    result = damped_newton(fgh, np.zeros(Xs.shape[1]), tol=tol, max_iter=max_iter,
                           on_accept=check_separation, name=f"{link.name} fit")
    coefficients = np.zeros(A.n_cols)
    coefficients[list(retained)] = result.x / scale
    if not result.converged:
        raise ConvergenceError(f"{link.name} fit did not converge: {result.message}",
                               iterate=coefficients, gradient_norm=result.gradient_norm,
                               iterations=result.iterations)
    residual = raw_residual(result.x)
    iterations = result.iterations
    if residual > tol:
        polished = damped_newton(fgh, result.x, tol=tol / max(1.0, float(scale.max())),
                                 max_iter=POLISH_ITER, on_accept=check_separation,
                                 name=f"{link.name} polish")
        iterations += polished.iterations
        polished_residual = raw_residual(polished.x)
        if polished_residual < residual:
            result, residual = polished, polished_residual
        if residual > tol:
            logger.debug("%s fit: raw score residual %.3e above tol after polishing", link.name, residual)
        coefficients[list(retained)] = result.x / scale
    eta = offset + Xs @ result.x
    return LogisticFit(coefficients=coefficients,
                       fitted_probabilities=link.inverse(eta),
                       linear_predictor=eta,
                       converged=True,
                       iterations=iterations,
                       max_score_residual=residual,
                       retained=retained,
                       dropped_columns=dropped,
                       link=link.name,
                       scaled_score_residual=result.gradient_norm)
