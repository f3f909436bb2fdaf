"""
Empirical-likelihood solver - maximization of ℓ(λ), the κₜ refits and the calibrated likelihood estimators

ω(X;λ) = π̃(X) + λᵀh̃(X) must stay positive on treated rows and below one on
untreated rows. The log terms of ℓ act as their own barrier: Newton steps are
halved until the trial point is feasible and does not decrease the objective.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from src.data_io.dataset import Dataset
from src.errors import BoundaryError, ConvergenceError, InfeasibleError, LineSearchError, StructuralError
from src.estimation.tilde_h import H1_CONTROL, H1_TREATED, TildeH
from src.numkernel import NewtonResult, damped_newton
from src.utils import column_rms

logger = logging.getLogger(__name__)

EL_TOL = 1e-10
EL_MAX_ITER = 200
OMEGA_FLOOR = 1e-12


@dataclass(frozen=True)
class OmegaState:
    """λ on the retained h̃ columns and ω(Xᵢ;λ) on every row"""

    lam: np.ndarray
    omega: np.ndarray
    tilde_pi: np.ndarray
    t: np.ndarray
    iterations: int = 0
    gradient_norm: float = 0.0

    @property
    def feasible(self) -> bool:
        return bool(np.all(self.omega[self.t == 1] > 0) and np.all(self.omega[self.t == 0] < 1))


def _raise_unconverged(result: NewtonResult, what: str, iterate: np.ndarray):
    error = LineSearchError if result.message == "step halving exhausted" else ConvergenceError
    raise error(f"{what} did not converge: {result.message}", iterate=iterate,
                gradient_norm=result.gradient_norm, iterations=result.iterations)


def maximize_ell(tilde_pi: np.ndarray, tilde_h: np.ndarray, t: np.ndarray,
                 tol: float = EL_TOL, max_iter: int = EL_MAX_ITER) -> OmegaState:
    """λ̂ maximizing ℓ(λ) = Ẽ[T log ω + (1-T) log(1-ω)], started from λ = 0"""
    tilde_pi = np.asarray(tilde_pi, dtype=float)
    h = np.atleast_2d(np.asarray(tilde_h, dtype=float))
    if h.shape[0] != len(t) and h.shape[1] == len(t):
        h = h.T
    if np.any(tilde_pi <= 0) or np.any(tilde_pi >= 1):
        raise StructuralError("π̃ must lie strictly inside (0, 1)")
    treated = t == 1
    n = len(t)
    scale = column_rms(h)
    hs = h / scale

    def omega_of(lam):
        return tilde_pi + hs @ lam

    def fgh(lam):
        omega = omega_of(lam)
        with np.errstate(divide="ignore", invalid="ignore"):
            value = np.mean(np.where(treated, np.log(omega), np.log(1 - omega)))
            slope = np.where(treated, 1 / omega, -1 / (1 - omega))
            curvature = np.where(treated, 1 / omega ** 2, 1 / (1 - omega) ** 2)
        gradient = hs.T @ slope / n
        hessian = -(hs * curvature[:, None]).T @ hs / n
        return value, gradient, hessian

    def feasible(lam):
        omega = omega_of(lam)
        return bool(np.all(omega[treated] > 0) and np.all(omega[~treated] < 1))

    result = damped_newton(fgh, np.zeros(h.shape[1]), tol=tol, max_iter=max_iter,
                           feasible=feasible, name="EL maximization")
    if not result.converged:
        _raise_unconverged(result, "EL maximization", result.x / scale)
    lam = result.x / scale
    return OmegaState(lam=lam, omega=omega_of(result.x), tilde_pi=tilde_pi, t=np.asarray(t, dtype=float),
                      iterations=result.iterations, gradient_norm=result.gradient_norm)


def nu_lik_hat(state: OmegaState, data: Dataset):
    """(ν̂⁰_lik, ν̂¹_lik) in ratio form"""
    if not state.feasible:
        raise InfeasibleError("ω(X;λ) is outside its feasible region")
    t, y, pi, omega = data.t, data.y, state.tilde_pi, state.omega
    w0 = np.where(t == 0, pi / (1 - omega), 0.0)
    w1 = np.where(t == 1, pi / omega, 0.0)
    return float(np.sum(w0 * y) / np.sum(w0)), float(np.sum(w1 * y) / np.sum(w1))


@dataclass(frozen=True)
class KappaRefit:
    """λ̃₁ₜ in ω(t,X;·) = base + uᵀ(1-π̃(t,X))ṽₜ; for t = 0 the block enters with the sign flipped"""

    group: int
    lambda_block: np.ndarray
    omega_t: np.ndarray
    iterations: int
    gradient_norm: float
    stationarity_residual: float


def _arm(state: OmegaState, group: int):
    """(R_t, π̃(t,X), ω(t,X;λ̂))"""
    if group == 1:
        return state.t, state.tilde_pi, state.omega
    return 1 - state.t, 1 - state.tilde_pi, 1 - state.omega


def maximize_kappa(state: OmegaState, tilde_h: TildeH, group: int,
                   tol: float = EL_TOL, max_iter: int = EL_MAX_ITER) -> KappaRefit:
    """Maximize κₜ(λ₁ₜ) = Ẽ[Rₜ log ω(t,X;λ) / {1-π̃(t,X)} - λ₁ₜᵀṽₜ] with the other blocks held at λ̂.

    The stationarity condition is Ẽ[{Rₜ/ω(t,X;λ̃ᵗ) - 1}ṽₜ] = 0. Components of ṽₜ
    whose h̃ column was dropped start from 0.
    """
    if group not in (0, 1):
        raise StructuralError(f"Group must be 0 or 1, got {group}")
    if len(state.lam) != len(tilde_h.retained):
        raise StructuralError("λ̂ does not match the retained h̃ columns")
    R, pi_t, omega_hat = _arm(state, group)
    positions, members = tilde_h.block_members(H1_TREATED if group == 1 else H1_CONTROL)
    v = tilde_h.v(group).values
    a = (1 - pi_t)[:, None] * v
    sign = 1.0 if group == 1 else -1.0
    start = np.zeros(v.shape[1])
    start[members] = sign * state.lam[positions]
    base = omega_hat - a @ start

    scale = column_rms(v)
    vs, as_ = v / scale, a / scale
    arm = R == 1
    n = len(R)

    def omega_of(u):
        return base + as_ @ u

    def fgh(u):
        omega = omega_of(u)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_term = np.where(arm, np.log(omega) / (1 - pi_t), 0.0)
            ratio = np.where(arm, 1 / omega, 0.0)
            curvature = np.where(arm, (1 - pi_t) / omega ** 2, 0.0)
        value = np.mean(log_term - vs @ u)
        gradient = vs.T @ (ratio - 1) / n
        hessian = -(vs * curvature[:, None]).T @ vs / n
        return value, gradient, hessian

    def feasible(u):
        return bool(np.all(omega_of(u)[arm] > 0))

    result = damped_newton(fgh, start * scale, tol=tol, max_iter=max_iter,
                           feasible=feasible, name=f"kappa refit t={group}")
    omega_t = omega_of(result.x)
    floor = float(np.min(omega_t[arm])) if arm.any() else 1.0
    if floor < OMEGA_FLOOR:
        raise BoundaryError(f"κ refit for t={group} escaped to the boundary (min ω = {floor:.3e})",
                            iterate=result.x / scale, gradient_norm=result.gradient_norm,
                            iterations=result.iterations)
    if not result.converged:
        _raise_unconverged(result, f"κ refit for t={group}", result.x / scale)
    u = result.x / scale
    residual = float(np.max(np.abs(v.T @ (np.where(arm, 1 / omega_t, 0.0) - 1) / n)))
    return KappaRefit(group=group, lambda_block=sign * u, omega_t=omega_t,
                      iterations=result.iterations, gradient_norm=result.gradient_norm,
                      stationarity_residual=residual)


@dataclass(frozen=True)
class LikEstimate:
    """ν̃ᵗ_lik for both arms with the solver states that produced them"""

    nu0: float
    nu1: float
    lambda_hat: np.ndarray
    lambda_tilde_0: np.ndarray
    lambda_tilde_1: np.ndarray
    weights0: np.ndarray
    weights1: np.ndarray
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def att(self) -> float:
        return self.nu1 - self.nu0

    def effective_weights(self, group: int) -> np.ndarray:
        """Rₜπ̃/ω(t,X;λ̃ᵗ) normalized to sum to one"""
        w = self.weights1 if group == 1 else self.weights0
        return w / np.sum(w)


def nu_lik_tilde(state: OmegaState, refits: Dict[int, KappaRefit], data: Dataset,
                 m_hats: Optional[Dict[int, np.ndarray]] = None) -> LikEstimate:
    """ν̃ᵗ_lik = Ẽ[Rₜπ̃Y/ω(t,X;λ̃ᵗ)] / Ẽ[Rₜπ̃/ω(t,X;λ̃ᵗ)], with the Ẽ(T) form kept as a check"""
    q = data.n1 / data.n
    estimates, weights = {}, {}
    nu_hat0, nu_hat1 = nu_lik_hat(state, data)
    diagnostics = {"nu_hat0": nu_hat0, "nu_hat1": nu_hat1,
                   "ell_iterations": state.iterations, "ell_gradient_norm": state.gradient_norm}
    for group in (0, 1):
        refit = refits[group]
        R = data.t if group == 1 else 1 - data.t
        arm = R == 1
        if np.any(refit.omega_t[arm] <= 0):
            raise InfeasibleError(f"κ refit for t={group} is infeasible")
        w = np.where(arm, state.tilde_pi / np.where(arm, refit.omega_t, 1.0), 0.0)
        ratio = float(np.sum(w * data.y) / np.sum(w))
        low, high = data.y[arm].min(), data.y[arm].max()
        slack = 1e-9 * max(1.0, abs(low), abs(high))
        if not low - slack <= ratio <= high + slack:
            raise InfeasibleError(f"ν̃{group} = {ratio} outside the arm outcome range [{low}, {high}]")
        estimates[group] = ratio
        weights[group] = w
        diagnostics[f"kappa{group}_iterations"] = refit.iterations
        diagnostics[f"kappa{group}_residual"] = refit.stationarity_residual
        diagnostics[f"ratio_vs_q_gap{group}"] = abs(ratio - float(np.mean(w * data.y) / q))
        if m_hats is not None:
            m = m_hats[group]
            diagnostics[f"calibration_residual{group}"] = abs(
                float(np.mean(w * m) - np.mean(state.tilde_pi * m)))
    h_pi = state.tilde_pi
    diagnostics["denominator_gap"] = abs(
        float(np.mean(np.where(data.t == 0, h_pi / (1 - state.omega), 0.0))
              - np.mean(np.where(data.t == 1, h_pi / state.omega, 0.0))))
    return LikEstimate(nu0=estimates[0], nu1=estimates[1], lambda_hat=state.lam,
                       lambda_tilde_0=refits[0].lambda_block, lambda_tilde_1=refits[1].lambda_block,
                       weights0=weights[0], weights1=weights[1], diagnostics=diagnostics)
