"""
Dense linear algebra - collinearity detection and rank-revealing least squares
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg

from src.errors import StructuralError
from src.numkernel.design import DesignMatrix

logger = logging.getLogger(__name__)

RANK_TOL = 1e-8


@dataclass(frozen=True)
class LeastSquaresFit:
    """Coefficients on all columns (zero for dropped ones) and fitted values"""

    coefficients: np.ndarray
    fitted_values: np.ndarray
    rank: int
    dropped_columns: Tuple[str, ...]
    retained: Tuple[int, ...]


def detect_redundancy(A: DesignMatrix, rel_tol: float = RANK_TOL) -> Tuple[int, ...]:
    """Indices of a maximal linearly independent column subset.

    Columns are visited left to right, like the limited pivoting of LINPACK's
    dqrdc2: a column is kept when the part of it orthogonal to the columns
    already kept has norm at least rel_tol times its own norm. Earlier columns
    always win, so the result is a deterministic function of column order.

    The decomposition runs on columns normalized to unit length, so every
    pivot is at most 1 and the first retained pivot equals 1. The test is
    therefore pivot >= rel_tol x largest pivot of the equilibrated matrix. On
    raw columns the largest pivot would follow the column with the largest
    scale, so a tiny column would be dropped however independent it is.
    """
    if not 0 < rel_tol < 1:
        raise StructuralError(f"rel_tol must lie in (0, 1), got {rel_tol}")
    values = A.values
    norms = np.linalg.norm(values, axis=0)
    retained = []
    basis = np.empty((A.n_rows, 0))
    for j in range(A.n_cols):
        if norms[j] == 0 or not np.isfinite(norms[j]):
            continue
        column = values[:, j] / norms[j]
        residual = column - basis @ (basis.T @ column)
        # second pass keeps the basis orthogonal to roundoff
        residual = residual - basis @ (basis.T @ residual)
        pivot = np.linalg.norm(residual)
        if pivot >= rel_tol:
            retained.append(j)
            basis = np.column_stack([basis, residual / pivot])
    return tuple(retained)


def solve_least_squares(A: DesignMatrix, b: np.ndarray, rank_tol: float = RANK_TOL) -> LeastSquaresFit:
    """Minimum-norm least squares on the retained column subspace of A"""
    b = np.asarray(b, dtype=float)
    if A.n_cols == 0 or A.n_rows == 0:
        raise StructuralError("Least squares on an empty design matrix")
    if b.shape != (A.n_rows,):
        raise StructuralError(f"Response has shape {b.shape}, expected ({A.n_rows},)")
    retained = detect_redundancy(A, rank_tol)
    coefficients = np.zeros(A.n_cols)
    if retained:
        solution, _, _, _ = scipy.linalg.lstsq(A.values[:, retained], b)
        coefficients[list(retained)] = solution
    dropped = tuple(label for i, label in enumerate(A.labels) if i not in retained)
    if dropped:
        logger.debug("Least squares dropped redundant columns %s", dropped)
    return LeastSquaresFit(coefficients=coefficients,
                           fitted_values=A.values @ coefficients,
                           rank=len(retained),
                           dropped_columns=dropped,
                           retained=retained)


def solve_moment_system(M: np.ndarray, v: np.ndarray, rank_tol: float = RANK_TOL) -> Tuple[np.ndarray, bool]:
    """Solve M x = v, falling back to the minimum-norm solution when M is singular.

    Returns the solution and a flag telling whether the fallback was used.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    v = np.asarray(v, dtype=float)
    scale = np.max(np.abs(M)) if M.size else 0.0
    if scale == 0:
        return np.zeros(M.shape[1]), True
    solution, _, rank, singular_values = scipy.linalg.lstsq(M, v, cond=rank_tol)
    degraded = rank < min(M.shape)
    if degraded:
        logger.warning("Singular moment matrix (rank %d of %d); using minimum-norm solution",
                       rank, min(M.shape))
    return solution, degraded
