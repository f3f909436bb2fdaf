"""
Simulation designs - Qin-Zhang, Kang-Schafer and McCaffrey data generators with their model grids
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Tuple, Union

import numpy as np
import pandas as pd
from scipy.special import expit

from src.data_io.dataset import Dataset
from src.errors import ConfigError
from src.estimation.bundle import ModelCombo
from src.models.regressors import RegressorSpec

Seed = Union[int, np.random.Generator]

QZ_TRUE_ATT = 2.0


class Family(str, Enum):
    QIN_ZHANG = "qin_zhang"
    KANG_SCHAFER = "kang_schafer"
    MCCAFFREY = "mccaffrey"


class OutcomeSetting(str, Enum):
    LIN_OR = "LIN-OR"
    QUA_OR = "QUA-OR"


def _generator(rng: Seed) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(rng)))


def gen_qin_zhang(n: int, gamma_star: Tuple[float, float, float] = (1.0, 0.2, 0.2),
                  setting: Union[OutcomeSetting, str] = OutcomeSetting.LIN_OR, rng: Seed = 0) -> Dataset:
    """X₁ ~ N(0,1), X₂|X₁ ~ N(1 + 0.6X₁, 1), T ~ Bernoulli(expit(γ*ᵀ(1,X₁,X₂))), Yᵗ ~ N(mₜ(X), X₂²)"""
    setting = OutcomeSetting(setting)
    rng = _generator(rng)
    x1 = rng.standard_normal(n)
    x2 = 1 + 0.6 * x1 + rng.standard_normal(n)
    g0, g1, g2 = gamma_star
    t = (rng.uniform(size=n) <= expit(g0 + g1 * x1 + g2 * x2)).astype(float)
    if setting is OutcomeSetting.LIN_OR:
        m0 = 2 * x1 + 2 * x2
    else:
        m0 = 2 * x1 ** 2 + 3 * x2 ** 2 - x2
    m1 = m0 + QZ_TRUE_ATT
    sd = np.abs(x2)
    y1 = m1 + sd * rng.standard_normal(n)
    y0 = m0 + sd * rng.standard_normal(n)
    y = np.where(t == 1, y1, y0)
    X = pd.DataFrame({"X1": x1, "X2": x2})
    return Dataset(y, t, X, np.full(n, "qin_zhang", dtype=object))


def kang_schafer_x(z: np.ndarray) -> np.ndarray:
    """Observed transforms (x₁, x₂, x₃, x₄) of the latent z block"""
    z1, z2, z3, z4 = z.T
    return np.column_stack([np.exp(z1 / 2),
                            z2 / (1 + np.exp(z1)) + 10,
                            (0.04 * z1 * z3 + 0.6) ** 3,
                            (z2 + z4 + 20) ** 2])


def gen_kang_schafer(n: int, interaction: bool = False, rng: Seed = 0) -> Dataset:
    """y = 210 + 27.4z₁ + 13.7(z₂ + z₃ + z₄) [+ 20z₁z₂] + ε for both arms; carries z₁..z₄ and x₁..x₄"""
    rng = _generator(rng)
    z = rng.standard_normal((n, 4))
    eps = rng.standard_normal(n)
    u = rng.uniform(size=n)
    z1, z2, z3, z4 = z.T
    y = 210 + 27.4 * z1 + 13.7 * (z2 + z3 + z4) + eps
    if interaction:
        y = y + 20 * z1 * z2
    t = (u <= expit(-z1 + 0.5 * z2 - 0.25 * z3 - 0.1 * z4)).astype(float)
    x = kang_schafer_x(z)
    X = pd.DataFrame(np.column_stack([z, x]), columns=["z1", "z2", "z3", "z4", "x1", "x2", "x3", "x4"])
    tag = "mccaffrey" if interaction else "kang_schafer"
    return Dataset(y, t, X, np.full(n, tag, dtype=object))


@dataclass(frozen=True)
class SimDesign:
    family: Family
    n: int = 1000
    gamma_star: Tuple[float, float, float] = (1.0, 0.2, 0.2)
    setting: OutcomeSetting = OutcomeSetting.LIN_OR

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "setting", OutcomeSetting(self.setting))
        object.__setattr__(self, "gamma_star", tuple(float(g) for g in self.gamma_star))
        if self.n < 2:
            raise ConfigError(f"Sample size must be at least 2, got {self.n}")
        if len(self.gamma_star) != 3:
            raise ConfigError("gamma_star needs three entries (intercept, X1, X2)")

    @property
    def true_att(self) -> float:
        return QZ_TRUE_ATT if self.family is Family.QIN_ZHANG else 0.0

    @property
    def label(self) -> str:
        if self.family is Family.QIN_ZHANG:
            return f"{self.setting.value} gamma={self.gamma_star}"
        return self.family.value

    def generate(self, rng: Seed) -> Dataset:
        if self.family is Family.QIN_ZHANG:
            return gen_qin_zhang(self.n, self.gamma_star, self.setting, rng)
        return gen_kang_schafer(self.n, self.family is Family.MCCAFFREY, rng)


def spec_library(family: Family) -> Tuple[Dict[str, RegressorSpec], Dict[str, RegressorSpec]]:
    """(PS specs, OR specs) named as in the result tables"""
    family = Family(family)
    if family is Family.QIN_ZHANG:
        specs = {"linear": RegressorSpec.linear(("X1", "X2"), name="linear"),
                 "quadratic": RegressorSpec.quadratic(squares=("X1", "X2"), name="quadratic")}
        return specs, specs
    z = RegressorSpec.linear(("z1", "z2", "z3", "z4"), name="z")
    x = RegressorSpec.linear(("x1", "x2", "x3", "x4"), name="x")
    ps = {"z": z, "x": x}
    if family is Family.KANG_SCHAFER:
        return ps, {"z": z, "x": x}
    z2 = RegressorSpec.custom({"z1*z2": "z1 * z2"}, covariates=("z1", "z2", "z3", "z4"), name="z2")
    return ps, {"z2": z2, "z": z, "x": x}


def default_grid(family: Family) -> List[ModelCombo]:
    """OR spec outer, PS spec inner"""
    ps_specs, or_specs = spec_library(family)
    return [ModelCombo(ps=ps, outcome=outcome) for outcome in or_specs.values() for ps in ps_specs.values()]


@dataclass(frozen=True)
class Preset:
    designs: Tuple[SimDesign, ...]
    replicates: int


def _qz(gamma_star) -> Tuple[SimDesign, ...]:
    return tuple(SimDesign(Family.QIN_ZHANG, 1000, gamma_star, s) for s in OutcomeSetting)


PRESETS: Dict[str, Preset] = {
    "qz-weak": Preset(_qz((1.0, 0.1, 0.1)), 1000),
    "qz-moderate": Preset(_qz((1.0, 0.2, 0.2)), 1000),
    "qz-strong": Preset(_qz((1.0, 0.5, 0.5)), 1000),
    "kang-schafer": Preset((SimDesign(Family.KANG_SCHAFER, 1000),), 5000),
    "mccaffrey": Preset((SimDesign(Family.MCCAFFREY, 1000),), 5000),
}


def preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"Unknown preset '{name}'; choose from {sorted(PRESETS)}") from None
