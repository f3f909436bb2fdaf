"""
Design matrices - labeled real-valued columns shared by every fitting kernel
"""

from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.errors import StructuralError

# Provenance tags
CONSTANT = "constant"
COVARIATE = "covariate"
TRANSFORM = "transform"
FITTED = "fitted"


@dataclass(frozen=True)
class DesignMatrix:
    """Named columns of equal length n >= 1 with per-column provenance tags"""

    values: np.ndarray
    labels: Tuple[str, ...]
    provenance: Tuple[str, ...]

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise StructuralError("Design matrix must be two-dimensional")
        labels = tuple(self.labels)
        provenance = tuple(self.provenance)
        if values.shape[0] < 1:
            raise StructuralError("Design matrix needs at least one row")
        if len(labels) != values.shape[1] or len(provenance) != values.shape[1]:
            raise StructuralError(
                f"{values.shape[1]} columns but {len(labels)} labels and {len(provenance)} tags")
        if len(set(labels)) != len(labels):
            raise StructuralError(f"Duplicate column labels in {labels}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "provenance", provenance)

    @classmethod
    def from_columns(cls, columns: Dict[str, np.ndarray],
                     provenance: Optional[Dict[str, str]] = None) -> "DesignMatrix":
        """Build from an ordered mapping label -> vector"""
        if not columns:
            raise StructuralError("Design matrix needs at least one column")
        labels = list(columns)
        lengths = {len(np.atleast_1d(v)) for v in columns.values()}
        if len(lengths) != 1:
            raise StructuralError(f"Columns have unequal lengths {sorted(lengths)}")
        tags = provenance or {}
        values = np.column_stack([np.asarray(columns[k], dtype=float) for k in labels])
        return cls(values, tuple(labels), tuple(tags.get(k, COVARIATE) for k in labels))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def column(self, label: str) -> np.ndarray:
        return self.values[:, self.labels.index(label)]

    def select(self, indices: Iterable[int]) -> "DesignMatrix":
        """Subset of columns, in the given order"""
        idx = list(indices)
        if not idx:
            raise StructuralError("Cannot select an empty set of columns")
        return DesignMatrix(self.values[:, idx],
                            tuple(self.labels[i] for i in idx),
                            tuple(self.provenance[i] for i in idx))

    def take_rows(self, rows: Sequence[int]) -> "DesignMatrix":
        return DesignMatrix(self.values[np.asarray(rows, dtype=int)], self.labels, self.provenance)

    def hstack(self, other: "DesignMatrix") -> "DesignMatrix":
        if other.n_rows != self.n_rows:
            raise StructuralError(f"Row mismatch: {self.n_rows} vs {other.n_rows}")
        return DesignMatrix(np.hstack([self.values, other.values]),
                            self.labels + other.labels,
                            self.provenance + other.provenance)

    def scaled(self, weights: np.ndarray, prefix: str = "") -> "DesignMatrix":
        """Every column multiplied rowwise by weights, labels optionally prefixed"""
        w = np.asarray(weights, dtype=float)
        return DesignMatrix(self.values * w[:, None],
                            tuple(prefix + label for label in self.labels),
                            self.provenance)

    def non_constant(self) -> "DesignMatrix":
        """Columns not tagged as the constant"""
        return self.select(i for i, tag in enumerate(self.provenance) if tag != CONSTANT)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, columns=list(self.labels))
