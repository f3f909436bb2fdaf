"""
Outcome regression - identity-link least squares of Y on g_t(X) within each arm
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.data_io.dataset import Dataset
from src.errors import StructuralError
from src.numkernel import FITTED, DesignMatrix, LeastSquaresFit, solve_least_squares
from src.models.regressors import RegressorSpec, build_regressors

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OutcomeFit:
    """α̂_t and m̂_t(X) predicted on every row"""

    group: int
    spec: RegressorSpec
    coefficients: np.ndarray
    m_hat: np.ndarray
    lsq: LeastSquaresFit
    parallel: bool = False

    def as_design(self) -> DesignMatrix:
        return DesignMatrix(self.m_hat[:, None], (f"m{self.group}_hat",), (FITTED,))


def fit_or(spec: RegressorSpec, data: Dataset, t: int) -> OutcomeFit:
    """Least squares within the rows with T = t; redundant columns are dropped and recorded"""
    rows = np.flatnonzero(data.t == t)
    if rows.size == 0:
        raise StructuralError(f"No rows with T={t} for the outcome regression")
    design = build_regressors(spec, data.X)
    lsq = solve_least_squares(design.take_rows(rows), data.y[rows])
    if lsq.dropped_columns:
        logger.warning("OR fit for T=%d dropped columns %s", t, lsq.dropped_columns)
    return OutcomeFit(group=t, spec=spec, coefficients=lsq.coefficients,
                      m_hat=design.values @ lsq.coefficients, lsq=lsq)


def fit_or_parallel(spec: RegressorSpec, data: Dataset) -> Tuple[OutcomeFit, OutcomeFit]:
    """Pooled fit E(Y|T=t,X) = α₁,ₜ + α₍₁₎ᵀg₍₁₎(X) with arm intercepts and shared slopes"""
    design = build_regressors(spec, data.X)
    pooled = DesignMatrix(np.column_stack([1 - data.t, data.t]), ("1[T=0]", "1[T=1]"), ("constant",) * 2)
    pooled = pooled.hstack(design.non_constant()) if design.n_cols > 1 else pooled
    lsq = solve_least_squares(pooled, data.y)
    slopes = lsq.coefficients[2:]
    shared = design.non_constant().values @ slopes if design.n_cols > 1 else np.zeros(data.n)
    fits = []
    for t in (0, 1):
        coefficients = np.concatenate([[lsq.coefficients[t]], slopes])
        fits.append(OutcomeFit(group=t, spec=spec, coefficients=coefficients,
                               m_hat=lsq.coefficients[t] + shared, lsq=lsq, parallel=True))
    return fits[0], fits[1]
