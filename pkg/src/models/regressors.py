"""
Regressor specifications - declarative builders for f(X), g_t(X) and c_t(X)
"""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Callable, Dict, Iterable, Optional, Tuple, Union

import numpy as np
import pandas as pd

from src.errors import ConfigError, RegressorError, StructuralError
from src.numkernel import CONSTANT, COVARIATE, TRANSFORM, DesignMatrix, PCATransform

Expression = Union[str, Callable[[pd.DataFrame], Any]]


class RegressorKind(str, Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Transform:
    """A named function of the covariate row; strings are evaluated with DataFrame.eval"""

    name: str
    expression: Expression

    def evaluate(self, X: pd.DataFrame) -> np.ndarray:
        if callable(self.expression):
            values = self.expression(X)
        else:
            values = X.eval(self.expression)
        values = np.broadcast_to(np.asarray(values, dtype=float), (len(X),))
        return values


@dataclass(frozen=True)
class RegressorSpec:
    """Constant, then linear terms, squared terms and custom transforms in declaration order"""

    kind: RegressorKind = RegressorKind.LINEAR
    covariates: Tuple[str, ...] = ()
    squares: Tuple[str, ...] = ()
    transforms: Tuple[Transform, ...] = ()
    projection: Optional[PCATransform] = None
    name: str = ""

    @classmethod
    def linear(cls, covariates: Iterable[str] = (), name: str = "") -> "RegressorSpec":
        return cls(RegressorKind.LINEAR, covariates=tuple(covariates), name=name or "linear")

    @classmethod
    def quadratic(cls, covariates: Iterable[str] = (), squares: Iterable[str] = (),
                  name: str = "") -> "RegressorSpec":
        return cls(RegressorKind.QUADRATIC, covariates=tuple(covariates), squares=tuple(squares),
                   name=name or "quadratic")

    @classmethod
    def custom(cls, transforms: Dict[str, Expression], covariates: Iterable[str] = (),
               name: str = "") -> "RegressorSpec":
        return cls(RegressorKind.CUSTOM, covariates=tuple(covariates),
                   transforms=tuple(Transform(k, v) for k, v in transforms.items()),
                   name=name or "custom")

    @classmethod
    def from_dict(cls, raw: Dict[str, Any], name: str = "") -> "RegressorSpec":
        """Parse the config form {"kind", "covariates", "squares", "transforms"}"""
        unknown = set(raw) - {"kind", "covariates", "squares", "transforms", "name"}
        if unknown:
            raise ConfigError(f"Unknown regressor spec keys {sorted(unknown)}")
        try:
            kind = RegressorKind(raw.get("kind", "linear"))
        except ValueError as e:
            raise ConfigError(f"Unknown regressor kind '{raw.get('kind')}'") from e
        transforms = raw.get("transforms", {})
        if not isinstance(transforms, dict):
            raise ConfigError("Regressor transforms must map names to expressions")
        return cls(kind=kind,
                   covariates=tuple(raw.get("covariates", ())),
                   squares=tuple(raw.get("squares", ())),
                   transforms=tuple(Transform(k, v) for k, v in transforms.items()),
                   name=raw.get("name", name) or kind.value)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "covariates": list(self.covariates),
                "squares": list(self.squares), "name": self.name,
                "transforms": {t.name: t.expression if isinstance(t.expression, str) else repr(t.expression)
                               for t in self.transforms}}

    def terms(self) -> Tuple[Transform, ...]:
        linear = tuple(Transform(c, lambda X, c=c: X[c]) for c in self.covariates)
        squared = tuple(Transform(f"{c}^2", lambda X, c=c: X[c] ** 2) for c in self.squares)
        return linear + squared + self.transforms

    def with_projection(self, projection: Optional[PCATransform]) -> "RegressorSpec":
        return replace(self, projection=projection)


def build_regressors(spec: RegressorSpec, X: pd.DataFrame) -> DesignMatrix:
    """Constant column first, then every term in declaration order"""
    n = len(X)
    if n == 0:
        raise StructuralError("Cannot build regressors on zero rows")
    columns = {"1": np.ones(n)}
    tags = {"1": CONSTANT}
    for term in spec.terms():
        try:
            values = term.evaluate(X)
        except (KeyError, NameError) as e:
            raise StructuralError(f"Transform '{term.name}' needs missing covariate {e}") from e
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise RegressorError(term.name, int(bad[0]))
        columns[term.name] = values
        tags[term.name] = COVARIATE if term.name in spec.covariates else TRANSFORM
    design = DesignMatrix.from_columns(columns, tags)
    if spec.projection is None:
        return design
    return design.select([0]).hstack(spec.projection.apply(design))
