"""
Errors - Exception hierarchy shared by the fitting, estimation and CLI layers
"""

from typing import Optional, Sequence

import numpy as np


class CalibattError(Exception):
    """Base class for every error raised by calibatt"""


class StructuralError(CalibattError, ValueError):
    """Inputs with the wrong shape, labels or class composition"""


class RegressorError(StructuralError):
    """A regressor transform produced a non-finite value"""

    def __init__(self, transform: str, row: int):
        self.transform = transform
        self.row = row
        super().__init__(f"Transform '{transform}' produced a non-finite value at row {row}")


class SeparationError(CalibattError):
    """Fitted probabilities drifted to 0 or 1"""

    def __init__(self, rows: Sequence[int], advice: str = ""):
        self.rows = np.asarray(rows, dtype=int)
        self.advice = advice
        shown = ", ".join(str(r) for r in self.rows[:10])
        more = "" if len(self.rows) <= 10 else f" (+{len(self.rows) - 10} more)"
        message = f"Quasi-complete separation at rows {shown}{more}"
        if advice:
            message = f"{message}; {advice}"
        super().__init__(message)


class ConvergenceError(CalibattError):
    """An iterative solver stopped without meeting its tolerance"""

    def __init__(self, message: str, iterate: Optional[np.ndarray] = None,
                 gradient_norm: float = float("nan"), iterations: int = 0):
        self.iterate = None if iterate is None else np.array(iterate, dtype=float)
        self.gradient_norm = gradient_norm
        self.iterations = iterations
        super().__init__(f"{message} (iterations={iterations}, gradient norm={gradient_norm:.3e})")


class LineSearchError(ConvergenceError):
    """Step-halving exhausted without a feasible ascent step"""


class BoundaryError(ConvergenceError):
    """A refit escaped to the boundary of its feasible region"""


class InfeasibleError(CalibattError):
    """No feasible solution exists for the requested weights"""


class WeightError(CalibattError):
    """An inverse-probability weight is not finite"""

    def __init__(self, row: int):
        self.row = row
        super().__init__(f"Non-finite inverse weight at row {row}")


class DataError(CalibattError):
    """Dataset ingestion failed"""


class ConfigError(CalibattError):
    """Run configuration is invalid"""
