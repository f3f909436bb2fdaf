"""
Utility functions for calibatt
"""

import hashlib
import json
import logging
import os
from datetime import datetime
from typing import Any, Dict, Optional

import numpy as np

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
WORKERS_ENV = "CALIBATT_WORKERS"


def setup_logging(level: str = "INFO", log_file: Optional[str] = None):
    """Configure the root logger once for the command-line driver"""
    handlers = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO),
                        format=LOG_FORMAT, handlers=handlers, force=True)


def default_workers() -> int:
    """Worker count from the environment, 1 when unset or invalid"""
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def replicate_generator(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for one replicate, independent of scheduling order"""
    sequence = np.random.SeedSequence(seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(sequence))


def config_hash(config: Dict[str, Any]) -> str:
    """sha256 of the canonical JSON form of a config dictionary"""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def timestamp() -> str:
    """Current time formatted for report headers"""
    return datetime.now().strftime("%Y-%m-%dT%H:%M:%S")


def column_rms(matrix: np.ndarray) -> np.ndarray:
    """Root-mean-square of each column, with zero columns mapped to 1"""
    rms = np.sqrt(np.mean(np.square(matrix), axis=0))
    return np.where(rms > 0, rms, 1.0)
