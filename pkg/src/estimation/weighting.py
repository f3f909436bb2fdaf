"""
Weighting estimators - OR, IPW, AIPW and the balancing (HIR) weights
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Tuple, Union

import numpy as np

from src.data_io.dataset import Dataset
from src.errors import InfeasibleError, StructuralError, WeightError
from src.models.outcome import OutcomeFit
from src.models.regressors import RegressorSpec, build_regressors
from src.numkernel import damped_newton
from src.utils import column_rms

logger = logging.getLogger(__name__)

HIR_TOL = 1e-12
HIR_MAX_ITER = 200
# keeps exp() finite during the line search
EXP_CAP = 700.0


def _treated_share(data: Dataset) -> float:
    if data.n1 == 0:
        raise StructuralError("No treated rows")
    return data.n1 / data.n


def untreated_odds(pi: np.ndarray, t: np.ndarray) -> np.ndarray:
    """π/(1-π) on untreated rows and 0 on treated rows; non-finite weights raise WeightError"""
    pi = np.asarray(pi, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        odds = np.where(t == 0, pi / (1 - pi), 0.0)
    bad = np.flatnonzero(~np.isfinite(odds) | ((t == 0) & (pi >= 1)))
    if bad.size:
        raise WeightError(int(bad[0]))
    return odds


def max_untreated_weight(pi: np.ndarray, t: np.ndarray) -> float:
    """max 1/(1-π) over untreated rows"""
    untreated = pi[t == 0]
    return float(np.max(1 / (1 - untreated))) if untreated.size else float("nan")


def nu1_np(data: Dataset) -> float:
    """Treated-group mean Ẽ(TY)/Ẽ(T)"""
    _treated_share(data)
    return float(np.sum(data.t * data.y) / data.n1)


def nu_or(orfit: OutcomeFit, data: Dataset, t: int = None) -> float:
    """Ẽ{T m̂_t(X)}/Ẽ(T); t defaults to the group the fit was made on"""
    if t is not None and t != orfit.group:
        raise StructuralError(f"Outcome fit is for T={orfit.group}, not T={t}")
    _treated_share(data)
    return float(np.sum(data.t * orfit.m_hat) / data.n1)


def nu0_ipw(pi: np.ndarray, data: Dataset, ratio: bool = False) -> float:
    """Ẽ[(1-T)πY/(1-π)] over Ẽ(T), or over Ẽ[(1-T)π/(1-π)] for the ratio form"""
    q = _treated_share(data)
    odds = untreated_odds(pi, data.t)
    numerator = np.mean(odds * data.y)
    denominator = np.mean(odds) if ratio else q
    return float(numerator / denominator)


class AIPWFlavor(str, Enum):
    NP = "np"
    SP = "sp"


def tau0(pi: np.ndarray, h: np.ndarray, data: Dataset) -> np.ndarray:
    """τ⁰(π, h) = (1-T)πY/(1-π) - {(1-T)/(1-π) - 1} h"""
    odds = untreated_odds(pi, data.t)
    inverse = np.where(data.t == 0, 1 + odds, 0.0)
    return odds * data.y - (inverse - 1) * h


def nu0_aipw(pi: np.ndarray, m0: np.ndarray, data: Dataset,
             flavor: Union[AIPWFlavor, str] = AIPWFlavor.NP) -> float:
    """Ẽ{τ⁰(π, m̂₀)}/Ẽ(T) (NP) or Ẽ{τ⁰(π, π m̂₀)}/Ẽ(T) (SP)"""
    flavor = AIPWFlavor(flavor)
    q = _treated_share(data)
    h = m0 if flavor is AIPWFlavor.NP else pi * m0
    return float(np.mean(tau0(pi, h, data)) / q)


def aipw_sp_denominators(pi: np.ndarray, m0: np.ndarray, data: Dataset) -> Tuple[float, float]:
    """ν̂⁰_SP with denominator Ẽ(T) and with Ẽ(π̂); equal for a logistic fit with intercept"""
    q = _treated_share(data)
    numerator = np.mean(tau0(pi, pi * m0, data))
    return float(numerator / q), float(numerator / np.mean(pi))


def nu1_aipw_sp(pi: np.ndarray, m1: np.ndarray, data: Dataset) -> float:
    """Ẽ[TY - {T - π̂} m̂₁]/Ẽ(T)"""
    q = _treated_share(data)
    return float(np.mean(data.t * data.y - (data.t - pi) * m1) / q)


@dataclass(frozen=True)
class HIRWeights:
    """Balancing weights r(X) = exp(γ̆ᵀf) on every row; only untreated rows carry weight"""

    gamma: np.ndarray
    r: np.ndarray
    balance_residual: float
    iterations: int

    @property
    def breve_pi(self) -> np.ndarray:
        """π̆ = r/(1 + r), the propensity implied by the weights"""
        return self.r / (1 + self.r)


def hir_weights(data: Dataset, f_spec: RegressorSpec, tol: float = HIR_TOL,
                max_iter: int = HIR_MAX_ITER) -> HIRWeights:
    """Solve Σ(1-T) r f = Σ T f through its convex dual Σ_{T=0} exp(γᵀf) - γᵀ Σ_{T=1} f"""
    if data.n0 == 0:
        raise StructuralError("No untreated rows to reweight")
    _treated_share(data)
    F = build_regressors(f_spec, data.X).values
    scale = column_rms(F)
    Fs = F / scale
    F0 = Fs[data.t == 0]
    target = Fs[data.t == 1].sum(axis=0)
    n = data.n

    def fgh(gamma):
        r0 = np.exp(F0 @ gamma)
        value = -(np.sum(r0) - gamma @ target) / n
        gradient = (target - F0.T @ r0) / n
        hessian = -(F0 * r0[:, None]).T @ F0 / n
        return value, gradient, hessian

    def feasible(gamma):
        return np.max(F0 @ gamma) < EXP_CAP

    start = np.zeros(F.shape[1])
    constant = np.flatnonzero(np.all(F == 1, axis=0))
    if constant.size:
        start[constant[0]] = np.log(data.n1 / data.n0) * scale[constant[0]]
    result = damped_newton(fgh, start, tol=tol, max_iter=max_iter, feasible=feasible, name="HIR balance")
    if not result.converged:
        raise InfeasibleError(f"Balancing weights do not exist or were not found ({result.message}, "
                              f"gradient norm {result.gradient_norm:.3e}); check covariate overlap")
    gamma = result.x / scale
    r = np.exp(F @ gamma)
    residual = float(np.max(np.abs(F[data.t == 0].T @ r[data.t == 0] - F[data.t == 1].sum(axis=0))))
    logger.debug("HIR weights solved in %d iterations (balance residual %.3e)", result.iterations, residual)
    return HIRWeights(gamma=gamma, r=r, balance_residual=residual, iterations=result.iterations)


def nu0_hir(weights: HIRWeights, data: Dataset) -> float:
    """Ẽ[(1-T) r Y]/Ẽ(T)"""
    q = _treated_share(data)
    return float(np.mean((1 - data.t) * weights.r * data.y) / q)
