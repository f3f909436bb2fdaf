"""
Datasets - immutable (Y, T, X) tables, CSV ingestion and LaLonde-style composites
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.errors import DataError, StructuralError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """Observations (Yᵢ, Tᵢ, Xᵢ) with a source tag per row"""

    y: np.ndarray
    t: np.ndarray
    X: pd.DataFrame
    provenance: np.ndarray = None

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        t = np.array(self.t, dtype=float)
        X = self.X.reset_index(drop=True).astype(float).copy()
        n = len(y)
        provenance = (np.full(n, "data", dtype=object) if self.provenance is None
                      else np.array(self.provenance, dtype=object))
        if not (len(t) == n and len(X) == n and len(provenance) == n):
            raise StructuralError(
                f"Unequal lengths: y={n}, t={len(t)}, X={len(X)}, provenance={len(provenance)}")
        if not np.all((t == 0) | (t == 1)):
            bad = int(np.flatnonzero((t != 0) & (t != 1))[0])
            raise StructuralError(f"Treatment must be 0/1; row {bad} has {t[bad]}")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X.to_numpy()))):
            raise StructuralError("Dataset contains non-finite values")
        for array in (y, t, provenance):
            array.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "provenance", provenance)

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def n1(self) -> int:
        return int(self.t.sum())

    @property
    def n0(self) -> int:
        return self.n - self.n1

    def take(self, rows: Sequence[int]) -> "Dataset":
        """Rows in the given order (repeats allowed), as a new dataset"""
        rows = np.asarray(rows, dtype=int)
        return Dataset(self.y[rows], self.t[rows], self.X.iloc[rows], self.provenance[rows])

    def with_outcome(self, y: np.ndarray) -> "Dataset":
        return Dataset(np.asarray(y, dtype=float), self.t, self.X, self.provenance)

    def to_frame(self, outcome: str = "y", treatment: str = "t") -> pd.DataFrame:
        frame = self.X.copy()
        frame.insert(0, treatment, self.t)
        frame.insert(0, outcome, self.y)
        frame["provenance"] = self.provenance
        return frame


@dataclass(frozen=True)
class CSVSchema:
    """Mapping from dataset roles to file columns; covariates map dataset name -> file column"""

    outcome: str
    treatment: str
    covariates: Dict[str, str] = field(default_factory=dict)
    source: Optional[str] = None

    @classmethod
    def from_dict(cls, raw: Dict) -> "CSVSchema":
        covariates = raw.get("covariates", {})
        if isinstance(covariates, (list, tuple)):
            covariates = {c: c for c in covariates}
        return cls(outcome=raw["outcome"], treatment=raw["treatment"],
                   covariates=dict(covariates), source=raw.get("source"))


LALONDE_COVARIATES = ("age", "school", "black", "hisp", "married", "nodegr",
                      "re74", "re75", "u74", "u75")
LALONDE_SCHEMA = CSVSchema(outcome="re78", treatment="treat",
                           covariates={c: c for c in LALONDE_COVARIATES})


def load_csv(path: Union[str, Path], schema: CSVSchema, tag: Optional[str] = None) -> Dataset:
    """Typed parse of a CSV file; rows are numbered from 1 in error messages"""
    path = Path(path)
    if not path.exists():
        raise DataError(f"File not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"Failed to parse {path}: {e}") from e

    wanted = [schema.outcome, schema.treatment, *schema.covariates.values()]
    missing = [c for c in wanted if c not in frame.columns]
    if missing:
        raise DataError(f"{path.name}: missing columns {missing}")

    parsed = {}
    for column in wanted:
        raw = frame[column]
        values = pd.to_numeric(raw, errors="coerce")
        absent = raw.isna()
        if absent.any():
            rows = (np.flatnonzero(absent.to_numpy()) + 1).tolist()
            raise DataError(f"{path.name}: missing values in column '{column}' at rows {rows[:20]}")
        unparsed = values.isna()
        if unparsed.any():
            row = int(np.flatnonzero(unparsed.to_numpy())[0]) + 1
            raise DataError(f"{path.name}: cannot parse '{raw.iloc[row - 1]}' in column '{column}' at row {row}")
        parsed[column] = values.to_numpy(dtype=float)

    t = parsed[schema.treatment]
    bad = np.flatnonzero((t != 0) & (t != 1))
    if bad.size:
        raise DataError(f"{path.name}: treatment column '{schema.treatment}' must be 0/1; "
                        f"row {int(bad[0]) + 1} has {t[bad[0]]:g}")

    X = pd.DataFrame({name: parsed[column] for name, column in schema.covariates.items()})
    if schema.source and schema.source in frame.columns:
        provenance = frame[schema.source].to_numpy(dtype=object)
    else:
        provenance = np.full(len(frame), tag or path.stem, dtype=object)
    logger.info("Loaded %d rows from %s", len(frame), path)
    return Dataset(parsed[schema.outcome], t, X, provenance)


class Arm(str, Enum):
    """Which experimental arm plays the treated group of a composite"""

    TREATMENT = "treatment"  # effect estimation
    CONTROL = "control"  # bias estimation


def compose_analysis(experimental: Dataset, comparison: Dataset, arm: Union[Arm, str]) -> Dataset:
    """Experimental arm rows as T=1 plus every comparison row as T=0"""
    arm = Arm(arm)
    selected = np.flatnonzero(experimental.t == (1 if arm is Arm.TREATMENT else 0))
    if selected.size == 0:
        raise StructuralError(f"Experimental {arm.value} arm is empty")
    if comparison.n == 0:
        raise StructuralError("Comparison sample is empty")
    if list(experimental.X.columns) != list(comparison.X.columns):
        raise StructuralError("Experimental and comparison covariates differ: "
                              f"{list(experimental.X.columns)} vs {list(comparison.X.columns)}")
    X = pd.concat([experimental.X.iloc[selected], comparison.X], ignore_index=True)
    y = np.concatenate([experimental.y[selected], comparison.y])
    t = np.concatenate([np.ones(selected.size), np.zeros(comparison.n)])
    provenance = np.concatenate([experimental.provenance[selected], comparison.provenance])
    return Dataset(y, t, X, provenance)
