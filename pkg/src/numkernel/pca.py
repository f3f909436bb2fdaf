"""
PCA column filter - drop low-variance principal directions of a covariate block
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from sklearn.decomposition import PCA

from src.errors import StructuralError
from src.numkernel.design import TRANSFORM, DesignMatrix

logger = logging.getLogger(__name__)

PSID_VARIANCE_RATIO = 0.3 ** 2


@dataclass(frozen=True)
class PCATransform:
    """Fitted centering, optional scaling and retained loadings, reusable on resamples"""

    columns: Tuple[str, ...]
    mean: np.ndarray
    scale: np.ndarray
    components: np.ndarray
    variances: np.ndarray
    kept: int

    def apply(self, A: DesignMatrix) -> DesignMatrix:
        """Scores of the retained components for any matrix carrying the fitted columns"""
        missing = [c for c in self.columns if c not in A.labels]
        if missing:
            raise StructuralError(f"PCA transform needs columns {missing}")
        block = np.column_stack([A.column(c) for c in self.columns])
        scores = ((block - self.mean) / self.scale) @ self.components.T
        labels = tuple(f"pc{k + 1}" for k in range(self.kept))
        return DesignMatrix(scores, labels, (TRANSFORM,) * self.kept)


def pca_filter(A: DesignMatrix, variance_ratio: float,
               standardize: bool = False) -> Tuple[DesignMatrix, PCATransform]:
    """Keep components whose sample variance is at least variance_ratio times the largest"""
    if not 0 < variance_ratio < 1:
        raise StructuralError(f"variance_ratio must lie in (0, 1), got {variance_ratio}")
    spread = np.ptp(A.values, axis=0)
    varying = [i for i in range(A.n_cols) if spread[i] > 0]
    if not varying:
        raise StructuralError("PCA filter needs at least one non-constant column")
    block = A.select(varying)
    mean = block.values.mean(axis=0)
    scale = block.values.std(axis=0, ddof=1) if standardize else np.ones(block.n_cols)
    scale = np.where(scale > 0, scale, 1.0)
    pca = PCA(svd_solver="full").fit((block.values - mean) / scale)
    variances = pca.explained_variance_
    kept = int(np.sum(variances >= variance_ratio * variances[0]))
    transform = PCATransform(columns=block.labels, mean=mean, scale=scale,
                             components=pca.components_[:kept].copy(),
                             variances=variances.copy(), kept=kept)
    logger.info("PCA filter kept %d of %d components (ratio %.4g)", kept, len(variances), variance_ratio)
    return transform.apply(A), transform
