"""
Calibrated likelihood pipeline - augmented PS fit, h̃, λ̂, the κ refits and ν̃ᵗ_lik
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

from src.data_io.dataset import Dataset
from src.estimation.el_solver import LikEstimate, maximize_ell, maximize_kappa, nu_lik_tilde
from src.estimation.tilde_h import ControlVariates, TildeH, build_tilde_h
from src.models.augmented import AugmentedPSFit, AugVariant, CSpec, fit_aug_ps
from src.models.outcome import OutcomeFit
from src.models.propensity import PropensityFit

logger = logging.getLogger(__name__)


class LikVariant(str, Enum):
    LIK = "LIK"  # full augmented model, h̃ = (h̃₁, h̃₂)
    LIK2 = "LIK2"  # offset model, h̃ = h̃₁
    LIK_CAL = "LIK.cal"  # calibrated model, h̃₁ built from π̃cₜ

    @property
    def aug_variant(self) -> AugVariant:
        return {LikVariant.LIK: AugVariant.FULL, LikVariant.LIK2: AugVariant.OFFSET,
                LikVariant.LIK_CAL: AugVariant.CALIBRATED}[self]


@dataclass(frozen=True)
class CalibrationInputs:
    """Everything REG- and LIK-type estimators share for one variant"""

    aug: AugmentedPSFit
    tilde_h: TildeH
    cv: ControlVariates


def prepare_calibration(data: Dataset, ps: PropensityFit, or0: OutcomeFit, or1: OutcomeFit,
                        variant: Union[LikVariant, str] = LikVariant.LIK,
                        c_spec: Optional[CSpec] = None) -> CalibrationInputs:
    variant = LikVariant(variant)
    aug = fit_aug_ps(ps, or0, or1, data, variant.aug_variant, c_spec=c_spec)
    tilde_h, cv = build_tilde_h(aug, or0, or1, data, include_h2=variant is LikVariant.LIK,
                                c0=aug.c0, c1=aug.c1)
    return CalibrationInputs(aug=aug, tilde_h=tilde_h, cv=cv)


def lik_from_inputs(inputs: CalibrationInputs, data: Dataset, or0: OutcomeFit, or1: OutcomeFit) -> LikEstimate:
    state = maximize_ell(inputs.aug.tilde_pi, inputs.tilde_h.values, data.t)
    refits = {group: maximize_kappa(state, inputs.tilde_h, group) for group in (0, 1)}
    return nu_lik_tilde(state, refits, data, m_hats={0: or0.m_hat, 1: or1.m_hat})


def lik_estimator(data: Dataset, ps: PropensityFit, or0: OutcomeFit, or1: OutcomeFit,
                  variant: Union[LikVariant, str] = LikVariant.LIK,
                  c_spec: Optional[CSpec] = None) -> LikEstimate:
    """LIK, LIK2 or LIK.cal on one dataset"""
    inputs = prepare_calibration(data, ps, or0, or1, variant, c_spec)
    estimate = lik_from_inputs(inputs, data, or0, or1)
    logger.debug("%s: nu0=%.6g nu1=%.6g", LikVariant(variant).value, estimate.nu0, estimate.nu1)
    return estimate
