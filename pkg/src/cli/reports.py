"""
Report writers - header record plus CSV or JSON tables with stable column order
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import pandas as pd

from src import __version__
from src.estimation.bundle import EstimatorFailure
from src.estimation.results import EstimatorOutput
from src.utils import config_hash, timestamp

logger = logging.getLogger(__name__)

ESTIMATE_COLUMNS = ["combo", "estimator", "kind", "nu0", "nu1", "att", "error"]


def report_header(command: str, config: Dict[str, Any], seed: int) -> Dict[str, Any]:
    """Record written next to every report so a run can be reproduced from seed + config hash"""
    return {"command": command, "seed": seed, "config_sha256": config_hash(config),
            "version": __version__, "timestamp": timestamp()}


def estimate_table(results: Mapping[str, Mapping[str, Union[EstimatorOutput, EstimatorFailure]]]) -> pd.DataFrame:
    """One row per (combo, estimator); diagnostics as sorted diag.* columns after the fixed ones"""
    rows: List[Dict[str, Any]] = []
    for combo, outputs in results.items():
        for name, output in outputs.items():
            if isinstance(output, EstimatorFailure):
                rows.append({"combo": combo, "estimator": name, "kind": "",
                             "error": f"{output.error_type}: {output.message}"})
            else:
                rows.append({"combo": combo, **output.to_record(), "error": ""})
    diagnostics = sorted({k for row in rows for k in row if k.startswith("diag.")})
    return pd.DataFrame(rows, columns=ESTIMATE_COLUMNS + diagnostics)


def _records(frame: pd.DataFrame) -> List[Dict[str, Any]]:
    return json.loads(frame.to_json(orient="records", double_precision=15))


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
    logger.info("Wrote %s (%d rows)", path, len(frame))
    return path


def write_report(out_dir: Union[str, Path], name: str, header: Dict[str, Any],
                 tables: Dict[str, pd.DataFrame], fmt: str = "csv",
                 extra: Optional[Dict[str, Any]] = None) -> List[Path]:
    """CSV: <name>_<table>.csv files plus <name>_header.json; JSON: a single <name>.json"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "json":
        document = {"header": header, **(extra or {}),
                    "tables": {key: _records(frame) for key, frame in tables.items()}}
        path = out_dir / f"{name}.json"
        path.write_text(json.dumps(document, indent=2), encoding="utf-8")
        logger.info("Wrote %s", path)
        return [path]
    for key, frame in tables.items():
        written.append(write_csv(frame, out_dir / f"{name}_{key}.csv"))
    path = out_dir / f"{name}_header.json"
    path.write_text(json.dumps({"header": header, **(extra or {})}, indent=2), encoding="utf-8")
    written.append(path)
    return written
