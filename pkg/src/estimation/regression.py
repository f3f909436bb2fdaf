"""
Calibrated regression estimators ν̃ᵗ_reg = Ẽ(η̃ₜ - β̃ₜᵀξ̃ₜ)/Ẽ(T)
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from src.data_io.dataset import Dataset
from src.errors import StructuralError
from src.estimation.tilde_h import ControlVariates
from src.numkernel import solve_moment_system
from src.utils import column_rms

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RegressionComponent:
    group: int
    nu: float
    beta: np.ndarray
    degraded: bool
    calibration_residual: float
    nu_uncalibrated: float


def _beta(xi: np.ndarray, zeta: np.ndarray, eta: np.ndarray):
    """β̃ = Ẽ(ξζᵀ)⁻¹Ẽ(ξη) on RMS-scaled columns"""
    n = len(eta)
    scale = column_rms(xi)
    xs, zs = xi / scale, zeta / scale
    beta, degraded = solve_moment_system(xs.T @ zs / n, xs.T @ eta / n)
    return beta / scale, degraded


def nu_reg(cv: ControlVariates, data: Dataset, t: int, m_hat: Optional[np.ndarray] = None) -> RegressionComponent:
    """ν̃ᵗ_reg with its calibration check.

    When m_hat is given, the numerator is recomputed with m̂ₜ in place of Y and
    compared with Ẽ(π̃ m̂ₜ).
    """
    if t not in (0, 1):
        raise StructuralError(f"Group must be 0 or 1, got {t}")
    q = data.n1 / data.n
    if q == 0:
        raise StructuralError("No treated rows")
    xi, zeta, eta = cv.xi_for(t), cv.zeta(t), cv.eta(t)
    beta, degraded = _beta(xi, zeta, eta)
    nu = float(np.mean(eta - xi @ beta) / q)

    residual = float("nan")
    if m_hat is not None:
        eta_m = cv.eta(t, m_hat)
        beta_m, _ = _beta(xi, zeta, eta_m)
        residual = float(abs(np.mean(eta_m - xi @ beta_m) - np.mean(cv.tilde_pi * m_hat)))

    # β̂ = Ẽ(ξξᵀ)⁻¹Ẽ(ξη): the non-calibrated coefficient, reported only
    beta_hat, _, _, _ = scipy.linalg.lstsq(xi.T @ xi, xi.T @ eta)
    nu_uncalibrated = float(np.mean(eta - xi @ beta_hat) / q)
    return RegressionComponent(group=t, nu=nu, beta=beta, degraded=degraded,
                               calibration_residual=residual, nu_uncalibrated=nu_uncalibrated)
