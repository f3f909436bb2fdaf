"""
Bootstrap analysis - paired effect/bias estimates on resampled experimental + comparison pools

Each resample draws rows with replacement from the whole pool (experimental
treatment, experimental control and comparison rows together) and runs both
analyses on it: the treatment arm against the comparison sample gives the
effect, the control arm against the comparison sample gives the evaluation
bias. Their difference is formed within the resample.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from src.data_io.dataset import LALONDE_COVARIATES, Arm, Dataset, compose_analysis
from src.errors import CalibattError, ConfigError, ConvergenceError
from src.estimation.bundle import DEFAULT_ESTIMATORS, EstimatorFailure, ModelCombo, evaluate_combo, validate_estimators
from src.models.regressors import RegressorSpec, build_regressors
from src.numkernel import pca_filter
from src.utils import replicate_generator

logger = logging.getLogger(__name__)

ROLE_TREATMENT = "treatment"
ROLE_CONTROL = "control"
ROLE_COMPARISON = "comparison"

LONG_COLUMNS = ["resample", "combo", "estimator", "effect", "bias", "difference", "error"]


@dataclass(frozen=True)
class Pool:
    """All rows eligible for resampling with the role each one plays"""

    data: Dataset
    roles: np.ndarray

    @classmethod
    def from_parts(cls, experimental: Dataset, comparison: Dataset) -> "Pool":
        if list(experimental.X.columns) != list(comparison.X.columns):
            raise ConfigError("Experimental and comparison covariates differ")
        X = pd.concat([experimental.X, comparison.X], ignore_index=True)
        y = np.concatenate([experimental.y, comparison.y])
        t = np.concatenate([experimental.t, np.zeros(comparison.n)])
        provenance = np.concatenate([experimental.provenance, comparison.provenance])
        roles = np.concatenate([np.where(experimental.t == 1, ROLE_TREATMENT, ROLE_CONTROL),
                                np.full(comparison.n, ROLE_COMPARISON)]).astype(object)
        return cls(Dataset(y, t, X, provenance), roles)

    def split(self, rows: np.ndarray) -> Tuple[Dataset, Dataset]:
        """(experimental, comparison) datasets made of the given pool rows"""
        roles = self.roles[rows]
        experimental = rows[roles != ROLE_COMPARISON]
        comparison = rows[roles == ROLE_COMPARISON]
        return self.data.take(experimental), self.data.take(comparison)


def project_grid(grid: Sequence[ModelCombo], X: pd.DataFrame, variance_ratio: float,
                 standardize: bool = False) -> List[ModelCombo]:
    """Attach a PCA projection fitted once on X to every regressor spec of the grid"""
    projections: Dict[RegressorSpec, RegressorSpec] = {}

    def projected(spec: RegressorSpec) -> RegressorSpec:
        if spec not in projections:
            _, transform = pca_filter(build_regressors(spec, X), variance_ratio, standardize=standardize)
            projections[spec] = spec.with_projection(transform)
        return projections[spec]

    return [replace(combo, ps=projected(combo.ps), outcome=projected(combo.outcome)) for combo in grid]


LALONDE_SQUARES = ("age", "school", "re74", "re75")


def lalonde_specs() -> Dict[str, RegressorSpec]:
    """Linear and quadratic regressor specs over the LaLonde covariates"""
    return {"linear": RegressorSpec.linear(LALONDE_COVARIATES, name="linear"),
            "quadratic": RegressorSpec.quadratic(LALONDE_COVARIATES, LALONDE_SQUARES, name="quadratic")}


def lalonde_grid() -> List[ModelCombo]:
    """Same spec for PS and OR: linear/linear and quadratic/quadratic"""
    return [ModelCombo(ps=spec, outcome=spec) for spec in lalonde_specs().values()]


def _analyses(pool: Pool, rows: np.ndarray, grid: Sequence[ModelCombo],
              estimators: Sequence[str], index: int) -> List[dict]:
    records = []
    try:
        experimental, comparison = pool.split(rows)
        effect_data = compose_analysis(experimental, comparison, Arm.TREATMENT)
        bias_data = compose_analysis(experimental, comparison, Arm.CONTROL)
    except CalibattError as e:
        return [{"resample": index, "combo": combo.label, "estimator": name, "effect": np.nan,
                 "bias": np.nan, "difference": np.nan, "error": f"{type(e).__name__}: {e}"}
                for combo in grid for name in estimators]
    for combo in grid:
        effects = evaluate_combo(effect_data, combo, estimators)
        biases = evaluate_combo(bias_data, combo, estimators)
        for name in estimators:
            effect, bias = effects[name], biases[name]
            errors = [f"{r.error_type}: {r.message}" for r in (effect, bias) if isinstance(r, EstimatorFailure)]
            e = np.nan if isinstance(effect, EstimatorFailure) else effect.att
            b = np.nan if isinstance(bias, EstimatorFailure) else bias.att
            records.append({"resample": index, "combo": combo.label, "estimator": name,
                            "effect": e, "bias": b, "difference": e - b, "error": "; ".join(errors)})
    return records


def _resample(pool: Pool, seed: int, index: int, grid, estimators) -> List[dict]:
    rng = replicate_generator(seed, index)
    rows = rng.integers(0, pool.data.n, size=pool.data.n)
    return _analyses(pool, rows, grid, estimators, index)


@dataclass
class BootstrapReport:
    """Per (combo, estimator) paired summaries and the per-resample records behind them"""

    table: pd.DataFrame
    long: pd.DataFrame
    resamples: int
    seed: int
    benchmark: Optional[Tuple[float, float]] = None
    meta: Dict[str, object] = field(default_factory=dict)


def _summarize(long: pd.DataFrame, point: pd.DataFrame, benchmark) -> pd.DataFrame:
    rows = []
    point = point.set_index(["combo", "estimator"])
    for (combo, estimator), group in long.groupby(["combo", "estimator"], sort=False):
        paired = group[np.isfinite(group["difference"])].sort_values("resample")
        row = {"combo": combo, "estimator": estimator,
               "effect_point": point.loc[(combo, estimator), "effect"],
               "bias_point": point.loc[(combo, estimator), "bias"],
               "difference_point": point.loc[(combo, estimator), "difference"],
               "resamples_used": len(paired), "failures": len(group) - len(paired)}
        for column in ("effect", "bias", "difference"):
            values = paired[column].to_numpy()
            row[f"{column}_mean"] = float(np.mean(values)) if len(values) else np.nan
            row[f"{column}_se"] = float(np.std(values, ddof=1)) if len(values) > 1 else np.nan
        if benchmark is not None:
            row["effect_minus_benchmark"] = row["effect_mean"] - benchmark[0]
        rows.append(row)
    return pd.DataFrame(rows)


def bootstrap_analysis(experimental: Dataset, comparison: Dataset, grid: Sequence[ModelCombo],
                       estimators: Sequence[str] = DEFAULT_ESTIMATORS, resamples: int = 200,
                       seed: int = 0, pca_ratio: Optional[float] = None, pca_standardize: bool = False,
                       benchmark: Optional[Tuple[float, float]] = None, workers: int = 1,
                       progress: bool = True) -> BootstrapReport:
    """Paired effect / evaluation-bias bootstrap over the whole pool"""
    if resamples < 1:
        raise ConfigError(f"resamples must be at least 1, got {resamples}")
    if not grid:
        raise ConfigError("Model grid is empty")
    estimators = validate_estimators(estimators)
    pool = Pool.from_parts(experimental, comparison)
    if pca_ratio is not None:
        grid = project_grid(grid, pool.data.X, pca_ratio, standardize=pca_standardize)
    grid = list(grid)

    point = pd.DataFrame(_analyses(pool, np.arange(pool.data.n), grid, estimators, -1), columns=LONG_COLUMNS)
    logger.info("Bootstrap: %d resamples of %d pooled rows, %d workers", resamples, pool.data.n, workers)
    indices = tqdm(range(resamples), desc="Resamples", disable=not progress)
    batches = Parallel(n_jobs=workers)(delayed(_resample)(pool, seed, i, grid, estimators) for i in indices)
    long = pd.DataFrame([r for batch in batches for r in batch], columns=LONG_COLUMNS)
    long = long.sort_values(["resample"], kind="mergesort").reset_index(drop=True)

    if not np.isfinite(long["difference"]).any():
        raise ConvergenceError("Every bootstrap resample failed", iterations=resamples)
    table = _summarize(long, point, benchmark)
    for _, row in table[table["failures"] > 0].iterrows():
        logger.warning("%s %s: %d of %d resamples failed", row["combo"], row["estimator"],
                       row["failures"], resamples)
    return BootstrapReport(table=table, long=long, resamples=resamples, seed=seed, benchmark=benchmark)
