"""
Influence-function variance estimates for ν⁰, ν¹ and the ATT
"""

import logging
from enum import Enum
from typing import Dict, Optional, Union

import numpy as np
import scipy.linalg

from src.data_io.dataset import Dataset
from src.errors import StructuralError
from src.estimation.weighting import tau0
from src.models.outcome import OutcomeFit
from src.models.propensity import PropensityFit

logger = logging.getLogger(__name__)


class Influence(str, Enum):
    NP0 = "NP0"
    SPSTAR0 = "SPstar0"
    SP0 = "SP0"
    NP1 = "NP1"
    SPSTAR1 = "SPstar1"
    SP1 = "SP1"

    @property
    def group(self) -> int:
        return int(self.value[-1])


def project(target: np.ndarray, score: np.ndarray) -> np.ndarray:
    """Rowwise linear projection cov(Z₂, Z₁) var(Z₁)⁻¹ Z₁ from sample moments"""
    centered = score - score.mean(axis=0)
    n = len(target)
    variance = centered.T @ centered / (n - 1)
    covariance = centered.T @ (target - target.mean()) / (n - 1)
    coefficients, _, rank, _ = scipy.linalg.lstsq(variance, covariance)
    if rank < variance.shape[0]:
        logger.warning("Singular score variance (rank %d of %d); using least-squares projection",
                       rank, variance.shape[0])
    return score @ coefficients


def influence_values(data: Dataset, pi: np.ndarray, m_t: np.ndarray, nu_hat: float,
                     which: Union[Influence, str], score: Optional[np.ndarray] = None) -> np.ndarray:
    """Rowwise φ for the chosen setting with q̂ = Ẽ(T); SP forms need the fitted PS score"""
    which = Influence(which)
    t, y = data.t, data.y
    q = data.n1 / data.n
    shift = (t - pi) * (m_t - nu_hat) / q
    if which.group == 0:
        np_form = (tau0(pi, m_t, data) - t * nu_hat) / q
    else:
        np_form = (t * y - t * nu_hat) / q
    if which in (Influence.NP0, Influence.NP1):
        return np_form
    star = np_form - shift
    if which in (Influence.SPSTAR0, Influence.SPSTAR1):
        return star
    if score is None:
        raise StructuralError(f"{which.value} needs the propensity score")
    return star + project(shift, np.asarray(score, dtype=float))


def influence_variance(data: Dataset, pi: np.ndarray, m_t: np.ndarray, nu_hat: float,
                       which: Union[Influence, str], score: Optional[np.ndarray] = None) -> float:
    """Sample variance of the influence values over n"""
    values = influence_values(data, pi, m_t, nu_hat, which, score)
    return float(np.var(values, ddof=1) / data.n)


def influence_report(data: Dataset, ps: PropensityFit, or0: OutcomeFit, or1: OutcomeFit,
                     nu0: float, nu1: float) -> Dict[str, float]:
    """All six ν variances plus the ATT variances var(φ¹ - φ⁰)/n per setting"""
    score = ps.score(data.t)
    values = {}
    for which in Influence:
        m_t, nu = (or0.m_hat, nu0) if which.group == 0 else (or1.m_hat, nu1)
        values[which] = influence_values(data, ps.pi_hat, m_t, nu, which, score)
    report = {which.value: float(np.var(v, ddof=1) / data.n) for which, v in values.items()}
    for setting in ("NP", "SPstar", "SP"):
        difference = values[Influence(f"{setting}1")] - values[Influence(f"{setting}0")]
        report[f"ATT_{setting}"] = float(np.var(difference, ddof=1) / data.n)
    return report
