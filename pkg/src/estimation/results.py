"""
Estimator results - the (ν⁰, ν¹, ATT) record every estimator returns
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict


class EstimatorKind(str, Enum):
    OUTCOME_REGRESSION = "outcome_regression"
    IPW = "ipw"
    AIPW = "aipw"
    BALANCING = "balancing"
    REGRESSION = "regression"
    LIKELIHOOD = "likelihood"


@dataclass(frozen=True)
class EstimatorOutput:
    """Point estimates of ν⁰ and ν¹; att is always nu1 - nu0"""

    name: str
    nu0: float
    nu1: float
    kind: EstimatorKind
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    att: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "nu0", float(self.nu0))
        object.__setattr__(self, "nu1", float(self.nu1))
        object.__setattr__(self, "att", self.nu1 - self.nu0)

    def to_record(self) -> Dict[str, Any]:
        record = {"estimator": self.name, "kind": self.kind.value,
                  "nu0": self.nu0, "nu1": self.nu1, "att": self.att}
        record.update({f"diag.{k}": v for k, v in sorted(self.diagnostics.items())})
        return record
