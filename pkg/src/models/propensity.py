"""
Propensity score models - P(T=1|X) = Π{γᵀf(X)} with logistic or probit link
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np
from scipy.stats import norm

from src.data_io.dataset import Dataset
from src.numkernel import LOGISTIC, BinaryLink, DesignMatrix, LogisticFit, fit_logistic
from src.models.regressors import RegressorSpec, build_regressors

logger = logging.getLogger(__name__)

PROBIT = BinaryLink(
    name="probit",
    inverse=norm.cdf,
    derivative=norm.pdf,
    log_cdf=norm.logcdf,
    eta_cap=8.0,
)


class Link(str, Enum):
    LOGISTIC = "logistic"
    PROBIT = "probit"

    @property
    def binary_link(self) -> BinaryLink:
        return LOGISTIC if self is Link.LOGISTIC else PROBIT


@dataclass(frozen=True)
class PropensityFit:
    """Fitted base propensity model: design f(X), γ̂ and π̂(X)"""

    spec: RegressorSpec
    link: Link
    design: DesignMatrix
    fit: LogisticFit
    pi_hat: np.ndarray

    @property
    def gamma(self) -> np.ndarray:
        return self.fit.coefficients

    @property
    def rho(self) -> np.ndarray:
        """ρ̂(X) = Π'/{π̂(1-π̂)} at γ̂"""
        return self.link.binary_link.rho(self.fit.linear_predictor)

    def score(self, t: np.ndarray) -> np.ndarray:
        """Rowwise score s_γ(T,X) = (T - π̂) ρ̂ f(X) on the retained columns"""
        f = self.design.values[:, list(self.fit.retained)]
        return ((t - self.pi_hat) * self.rho)[:, None] * f


def fit_ps(spec: RegressorSpec, data: Dataset, link: Union[Link, str] = Link.LOGISTIC) -> PropensityFit:
    """Maximum likelihood propensity fit on f(X) built from spec"""
    link = Link(link)
    design = build_regressors(spec, data.X)
    fit = fit_logistic(design, data.t, link=link.binary_link)
    logger.debug("PS fit (%s, %s) converged in %d iterations", spec.name, link.value, fit.iterations)
    return PropensityFit(spec=spec, link=link, design=design, fit=fit, pi_hat=fit.fitted_probabilities)
