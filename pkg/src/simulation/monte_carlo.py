"""
Monte Carlo harness - replicate loop, per-cell bias/variance reduction and boxplot summaries

Replicate i draws its data from a Philox stream keyed by (seed, i), so the
report does not depend on worker count or scheduling. Records are sorted by
cell and replicate index before any moment is computed.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from src.errors import ConfigError
from src.estimation.bundle import DEFAULT_ESTIMATORS, EstimatorFailure, ModelCombo, evaluate_combo, validate_estimators
from src.simulation.designs import SimDesign, default_grid
from src.utils import replicate_generator

logger = logging.getLogger(__name__)

LONG_COLUMNS = ["design", "combo", "estimator", "replicate", "att", "error"]
CELL_COLUMNS = ["design", "combo", "estimator", "true_att", "replicates", "failures",
                "mean", "bias", "variance", "mc_se"]


def _run_replicate(index: int, seed: int, designs: Sequence[SimDesign],
                   grids: Sequence[Sequence[ModelCombo]], estimators: Sequence[str]) -> List[dict]:
    records = []
    for design, grid in zip(designs, grids):
        data = design.generate(replicate_generator(seed, index))
        for combo in grid:
            for name, result in evaluate_combo(data, combo, estimators).items():
                failed = isinstance(result, EstimatorFailure)
                records.append({"design": design.label, "combo": combo.label, "estimator": name,
                                "replicate": index,
                                "att": np.nan if failed else result.att,
                                "error": f"{result.error_type}: {result.message}" if failed else ""})
    return records


@dataclass
class MonteCarloReport:
    """Per-cell summaries plus the per-replicate estimates they came from"""

    cells: pd.DataFrame
    long: pd.DataFrame
    seed: int
    replicates: int
    estimators: Tuple[str, ...] = ()
    meta: Dict[str, object] = field(default_factory=dict)

    @property
    def failures(self) -> int:
        return int(self.cells["failures"].sum()) if len(self.cells) else 0

    def cell(self, combo: str, estimator: str, design: Optional[str] = None) -> pd.Series:
        rows = self.cells[(self.cells["combo"] == combo) & (self.cells["estimator"] == estimator)]
        if design is not None:
            rows = rows[rows["design"] == design]
        if len(rows) != 1:
            raise KeyError(f"No unique cell for {design!r} {combo!r} {estimator!r}")
        return rows.iloc[0]

    def wide_table(self) -> pd.DataFrame:
        """One row per (design, combo); for each estimator a bias and a variance column"""
        if not len(self.cells):
            return pd.DataFrame(columns=["design", "combo"])
        order = list(dict.fromkeys(self.cells["estimator"]))
        wide = self.cells.pivot_table(index=["design", "combo"], columns="estimator",
                                      values=["bias", "variance"], sort=False, dropna=False)
        columns = {}
        for name in order:
            columns[f"{name}.bias"] = wide[("bias", name)]
            columns[f"{name}.var"] = wide[("variance", name)]
        return pd.DataFrame(columns).reset_index()


def summarize(long: pd.DataFrame, true_att: Dict[str, float]) -> pd.DataFrame:
    """Bias, variance and Monte Carlo SE per cell; failed replicates are counted, not averaged"""
    rows = []
    for (design, combo, estimator), group in long.groupby(["design", "combo", "estimator"], sort=False):
        values = group.sort_values("replicate")["att"].to_numpy()
        ok = values[np.isfinite(values)]
        count = len(ok)
        mean = float(np.mean(ok)) if count else np.nan
        variance = float(np.var(ok, ddof=1)) if count > 1 else np.nan
        rows.append({"design": design, "combo": combo, "estimator": estimator,
                     "true_att": true_att[design], "replicates": count, "failures": len(values) - count,
                     "mean": mean, "bias": mean - true_att[design], "variance": variance,
                     "mc_se": float(np.sqrt(variance / count)) if count > 1 else np.nan})
    return pd.DataFrame(rows, columns=CELL_COLUMNS)


def run_monte_carlo(designs: Union[SimDesign, Sequence[SimDesign]], replicates: int,
                    estimators: Sequence[str] = DEFAULT_ESTIMATORS,
                    grid: Optional[Sequence[ModelCombo]] = None, seed: int = 0,
                    workers: int = 1, progress: bool = True) -> MonteCarloReport:
    """Estimate every (design, combo, estimator) cell over `replicates` generated datasets"""
    designs = (designs,) if isinstance(designs, SimDesign) else tuple(designs)
    if not designs:
        raise ConfigError("At least one design is required")
    if replicates < 0:
        raise ConfigError(f"replicates must be non-negative, got {replicates}")
    estimators = validate_estimators(estimators)
    grids = [tuple(grid) if grid is not None else tuple(default_grid(d.family)) for d in designs]
    if any(not g for g in grids):
        raise ConfigError("Model grid is empty")
    labels = [d.label for d in designs]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"Duplicate designs {labels}")

    logger.info("Monte Carlo: %d replicates x %d designs, %d workers", replicates, len(designs), workers)
    indices = tqdm(range(replicates), desc="Replicates", disable=not progress)
    batches = Parallel(n_jobs=workers)(
        delayed(_run_replicate)(i, seed, designs, grids, estimators) for i in indices)

    long = pd.DataFrame([r for batch in batches for r in batch], columns=LONG_COLUMNS)
    design_order = {label: k for k, label in enumerate(labels)}
    combo_order = {label: k for k, label in enumerate(dict.fromkeys(c.label for g in grids for c in g))}
    estimator_order = {name: k for k, name in enumerate(estimators)}
    if len(long):
        long = long.assign(_d=long["design"].map(design_order), _c=long["combo"].map(combo_order),
                           _e=long["estimator"].map(estimator_order))
        long = long.sort_values(["_d", "_c", "_e", "replicate"], kind="mergesort")
        long = long.drop(columns=["_d", "_c", "_e"]).reset_index(drop=True)
    cells = summarize(long, {d.label: d.true_att for d in designs})
    for _, row in cells[cells["failures"] > 0].iterrows():
        logger.warning("%s %s %s: %d of %d replicates failed", row["design"], row["combo"],
                       row["estimator"], row["failures"], row["failures"] + row["replicates"])
    return MonteCarloReport(cells=cells, long=long, seed=seed, replicates=replicates, estimators=estimators)


def boxplot_table(long: pd.DataFrame, limits: Optional[Tuple[float, float]] = None) -> pd.DataFrame:
    """Quartiles, 1.5·IQR whiskers and counts of estimates outside the display limits per cell"""
    rows = []
    keys = [k for k in ("design", "combo", "estimator") if k in long.columns]
    for key, group in long.groupby(keys, sort=False):
        values = group["att"].to_numpy(dtype=float)
        values = values[np.isfinite(values)]
        key = key if isinstance(key, tuple) else (key,)
        row = dict(zip(keys, key))
        if not values.size:
            rows.append({**row, "n": 0})
            continue
        q1, median, q3 = np.percentile(values, [25, 50, 75])
        iqr = q3 - q1
        inside = values[(values >= q1 - 1.5 * iqr) & (values <= q3 + 1.5 * iqr)]
        row.update({"n": int(values.size), "q1": q1, "median": median, "q3": q3,
                    "whisker_low": float(inside.min()), "whisker_high": float(inside.max())})
        if limits is not None:
            low, high = limits
            row["below_limit"] = int(np.sum(values < low))
            row["above_limit"] = int(np.sum(values > high))
        rows.append(row)
    return pd.DataFrame(rows)
