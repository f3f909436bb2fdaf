"""
Augmented propensity models - the base PS model enlarged with fitted outcome regressions

Three logistic variants are supported:
  full        logit π̃ = γᵀf(X) + δ₀m̂₀(X) + δ₁m̂₁(X)
  offset      logit π̃ = logit π̂(X) + γ₀ + δ₀m̂₀(X) + δ₁m̂₁(X)
  calibrated  logit π̃ = logit π̂(X) + γ₀ + δ₀ᵀc₀₍₁₎(X) + δ₁ᵀc₁₍₁₎(X)
and, for a non-logistic base link, the general augmentation
  π̃ = Π{γᵀf + γ₀ρ̂⁻¹ + δ₀ρ̂⁻¹m̂₀ + δ₁ρ̂⁻¹m̂₁}
solved from Ẽ[{T - π̃}(ρ̂f, 1, m̂₀, m̂₁)] = 0.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg

from src.data_io.dataset import Dataset
from src.errors import ConvergenceError, SeparationError, StructuralError
from src.numkernel import (CONSTANT, FITTED, TRANSFORM, DesignMatrix, LogisticFit,
                           detect_redundancy, fit_logistic)
from src.numkernel.glm import SCORE_TOL
from src.numkernel.newton import HALVING, MAX_HALVINGS
from src.models.outcome import OutcomeFit
from src.models.propensity import Link, PropensityFit
from src.models.regressors import RegressorSpec, build_regressors
from src.utils import column_rms

logger = logging.getLogger(__name__)

GENERAL_MAX_ITER = 100

CSpec = Union[RegressorSpec, Tuple[RegressorSpec, RegressorSpec]]


class AugVariant(str, Enum):
    FULL = "full"
    OFFSET = "offset"
    CALIBRATED = "calibrated"


@dataclass(frozen=True)
class AugmentedPSFit:
    """π̃(X) with its coefficients and the columns whose score equations it solves"""

    variant: AugVariant
    tilde_pi: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    design: DesignMatrix
    score_columns: DesignMatrix
    collapsed_to_base: bool
    base: PropensityFit
    fit: Optional[LogisticFit] = None
    c0: Optional[DesignMatrix] = None
    c1: Optional[DesignMatrix] = None
    rho: Optional[np.ndarray] = None
    condition_r: Optional[bool] = None
    condition_r_plus: Optional[bool] = None
    iterations: int = 0

    def score_residuals(self, t: np.ndarray) -> np.ndarray:
        """Ẽ[{T - π̃}a(X)] for every score column a"""
        return self.score_columns.values.T @ (t - self.tilde_pi) / len(t)


def _separation_advice(error: SeparationError) -> SeparationError:
    return SeparationError(error.rows, advice="augmented fit separated; refit with the offset variant")


def _logit(ps: PropensityFit) -> np.ndarray:
    """logit π̂ computed from the base linear predictor without cancellation"""
    link = ps.link.binary_link
    eta = ps.fit.linear_predictor
    return link.log_cdf(eta) - link.log_sf(eta)


def _fitted_columns(or0: OutcomeFit, or1: OutcomeFit) -> DesignMatrix:
    return or0.as_design().hstack(or1.as_design())


def fit_aug_ps(ps: PropensityFit, or0: OutcomeFit, or1: OutcomeFit, data: Dataset,
               variant: Union[AugVariant, str] = AugVariant.FULL,
               c_spec: Optional[CSpec] = None) -> AugmentedPSFit:
    """Fit one of the augmented PS variants on top of a base PS fit and two OR fits"""
    variant = AugVariant(variant)
    if len(ps.pi_hat) != data.n or len(or0.m_hat) != data.n or len(or1.m_hat) != data.n:
        raise StructuralError("PS and OR fits must come from the same data")
    if variant is AugVariant.FULL:
        if ps.link is not Link.LOGISTIC:
            return fit_aug_ps_general(ps, or0, or1, data)
        return _fit_full(ps, or0, or1, data)
    if variant is AugVariant.OFFSET:
        return _fit_offset(ps, or0, or1, data)
    return _fit_calibrated(ps, or0, or1, data, c_spec)


def _fit_full(ps, or0, or1, data) -> AugmentedPSFit:
    f = ps.design
    A = f.hstack(_fitted_columns(or0, or1))
    retained = detect_redundancy(A)
    p = f.n_cols
    if p not in retained and p + 1 not in retained:
        # m̂₀ and m̂₁ are linear in f(X): the augmented model is the base model
        logger.info("Augmented PS collapsed to the base model (fitted regressions linear in f)")
        return AugmentedPSFit(variant=AugVariant.FULL, tilde_pi=ps.pi_hat.copy(),
                              gamma=ps.gamma.copy(), delta=np.zeros(2), design=A, score_columns=f,
                              collapsed_to_base=True, base=ps, fit=ps.fit)
    try:
        fit = fit_logistic(A, data.t)
    except SeparationError as e:
        raise _separation_advice(e) from e
    return AugmentedPSFit(variant=AugVariant.FULL, tilde_pi=fit.fitted_probabilities,
                          gamma=fit.coefficients[:p], delta=fit.coefficients[p:], design=A,
                          score_columns=A.select(fit.retained), collapsed_to_base=False,
                          base=ps, fit=fit, iterations=fit.iterations)


def _fit_offset(ps, or0, or1, data) -> AugmentedPSFit:
    A = DesignMatrix(np.ones((data.n, 1)), ("1",), (CONSTANT,)).hstack(_fitted_columns(or0, or1))
    fit = fit_logistic(A, data.t, offset=_logit(ps))
    return AugmentedPSFit(variant=AugVariant.OFFSET, tilde_pi=fit.fitted_probabilities,
                          gamma=fit.coefficients[:1], delta=fit.coefficients[1:], design=A,
                          score_columns=A.select(fit.retained), collapsed_to_base=False,
                          base=ps, fit=fit, iterations=fit.iterations)


def _in_span(base: DesignMatrix, extra: DesignMatrix) -> bool:
    """Whether every column of extra is a linear combination of base"""
    combined = base.hstack(DesignMatrix(extra.values, tuple(f"_{l}" for l in extra.labels), extra.provenance))
    return len(detect_redundancy(combined)) == len(detect_redundancy(base))


def _fit_calibrated(ps, or0, or1, data, c_spec) -> AugmentedPSFit:
    if c_spec is None:
        c_spec = (or0.spec, or1.spec)
    elif isinstance(c_spec, RegressorSpec):
        c_spec = (c_spec, c_spec)
    C0 = build_regressors(c_spec[0], data.X)
    C1 = build_regressors(c_spec[1], data.X)
    A = DesignMatrix(np.ones((data.n, 1)), ("1",), (CONSTANT,))
    for prefix, C in (("c0:", C0), ("c1:", C1)):
        if C.n_cols > 1:
            block = C.non_constant()
            A = A.hstack(DesignMatrix(block.values, tuple(prefix + l for l in block.labels),
                                      (TRANSFORM,) * block.n_cols))
    fit = fit_logistic(A, data.t, offset=_logit(ps))

    condition_r = _in_span(C0, or0.as_design()) and _in_span(C1, or1.as_design())
    condition_r_plus = (condition_r and ps.link is Link.LOGISTIC
                        and _in_span(ps.design, C0) and _in_span(ps.design, C1))
    if not condition_r:
        logger.warning("Calibration targets do not span the fitted regressions; "
                       "calibrated estimators lose double robustness")
    return AugmentedPSFit(variant=AugVariant.CALIBRATED, tilde_pi=fit.fitted_probabilities,
                          gamma=fit.coefficients[:1], delta=fit.coefficients[1:], design=A,
                          score_columns=A.select(fit.retained), collapsed_to_base=False,
                          base=ps, fit=fit, c0=C0, c1=C1,
                          condition_r=condition_r, condition_r_plus=condition_r_plus,
                          iterations=fit.iterations)


def fit_aug_ps_general(ps: PropensityFit, or0: OutcomeFit, or1: OutcomeFit, data: Dataset,
                       tol: float = SCORE_TOL, max_iter: int = GENERAL_MAX_ITER) -> AugmentedPSFit:
    """Augmentation for an arbitrary link by damped Newton on the estimating equations.

    Regressors B = (f, ρ̂⁻¹, ρ̂⁻¹m̂₀, ρ̂⁻¹m̂₁) enter the linear predictor and the
    equations use E = ρ̂B = (ρ̂f, 1, m̂₀, m̂₁). Redundant columns of B are dropped
    together with their equations. With the logistic link ρ̂ ≡ 1 and this is the
    full augmented MLE.
    """
    link = ps.link.binary_link
    t = data.t
    n = data.n
    rho = link.rho(ps.fit.linear_predictor)
    f = ps.design.select(ps.fit.retained)
    B = f.hstack(DesignMatrix(np.column_stack([1 / rho, or0.m_hat / rho, or1.m_hat / rho]),
                              ("1/rho", "m0_hat/rho", "m1_hat/rho"), (TRANSFORM, FITTED, FITTED)))
    retained = detect_redundancy(B)
    Bk = B.values[:, list(retained)]
    scale = column_rms(Bk)
    Bs = Bk / scale
    Es = rho[:, None] * Bs

    def residual(theta):
        eta = Bs @ theta
        return Es.T @ (t - link.inverse(eta)) / n, eta

    theta = np.zeros(len(retained))
    p = f.n_cols
    theta[:p] = ps.fit.coefficients[list(ps.fit.retained)] * scale[:p]
    r, eta = residual(theta)
    iterations = 0
    while np.max(np.abs(r)) > tol:
        if iterations >= max_iter:
            raise ConvergenceError("general augmented PS did not converge", iterate=theta / scale,
                                   gradient_norm=float(np.max(np.abs(r))), iterations=iterations)
        jacobian = -(Es * link.derivative(eta)[:, None]).T @ Bs / n
        try:
            step = scipy.linalg.solve(jacobian, -r)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
            step, _, _, _ = scipy.linalg.lstsq(jacobian, -r)
        size, current = 1.0, np.linalg.norm(r)
        for _ in range(MAX_HALVINGS + 1):
            r_new, eta_new = residual(theta + size * step)
            if np.linalg.norm(r_new) < current:
                break
            size *= HALVING
        else:
            raise ConvergenceError("general augmented PS step halving exhausted", iterate=theta / scale,
                                   gradient_norm=float(np.max(np.abs(r))), iterations=iterations)
        theta, r, eta = theta + size * step, r_new, eta_new
        iterations += 1
        rows = np.flatnonzero(np.abs(eta) > link.eta_cap)
        if rows.size:
            raise _separation_advice(SeparationError(rows))

    coefficients = np.zeros(B.n_cols)
    coefficients[list(retained)] = theta / scale
    augmentation_kept = any(j >= p for j in retained if B.labels[j] != "1/rho")
    is_logistic = ps.link is Link.LOGISTIC
    collapsed = is_logistic and not augmentation_kept
    tilde_pi = ps.pi_hat.copy() if collapsed else link.inverse(Bs @ theta)
    equation_labels = tuple(("rho*" + l if j < p else {"1/rho": "1", "m0_hat/rho": "m0_hat",
                                                        "m1_hat/rho": "m1_hat"}[l])
                            for j, l in ((j, B.labels[j]) for j in retained))
    score_columns = DesignMatrix(rho[:, None] * Bk, equation_labels, tuple(B.provenance[j] for j in retained))
    return AugmentedPSFit(variant=AugVariant.FULL, tilde_pi=tilde_pi,
                          gamma=coefficients[:p + 1], delta=coefficients[p + 1:], design=B,
                          score_columns=score_columns, collapsed_to_base=collapsed, base=ps,
                          rho=None if is_logistic else rho, iterations=iterations)
