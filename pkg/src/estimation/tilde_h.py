"""
Calibration regressors h̃(X) and the control variates built from them
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.data_io.dataset import Dataset
from src.errors import StructuralError
from src.models.augmented import AugmentedPSFit
from src.models.outcome import OutcomeFit
from src.models.propensity import Link
from src.numkernel import TRANSFORM, DesignMatrix, detect_redundancy

logger = logging.getLogger(__name__)

H1_TREATED = "h1_1"
H1_CONTROL = "h1_0"
H2 = "h2"


@dataclass(frozen=True)
class TildeH:
    """Retained columns of h̃ = (h̃₁, h̃₂) with the block each one came from.

    h̃₁ = [(1-π̃)ṽ₁ᵀ, π̃ṽ₀ᵀ] and h̃₂ = π̃(1-π̃)(f₍₁₎ᵀ, m̂₀); columns are visited in
    that order and the retained index set plays the role of the selection
    matrix C.
    """

    candidates: DesignMatrix
    blocks: Tuple[str, ...]
    retained: Tuple[int, ...]
    v0: DesignMatrix
    v1: DesignMatrix
    tilde_pi: np.ndarray

    @property
    def columns(self) -> DesignMatrix:
        return self.candidates.select(self.retained)

    @property
    def values(self) -> np.ndarray:
        return self.candidates.values[:, list(self.retained)]

    @property
    def retained_blocks(self) -> Tuple[str, ...]:
        return tuple(self.blocks[j] for j in self.retained)

    @property
    def dropped_columns(self) -> Tuple[str, ...]:
        return tuple(l for j, l in enumerate(self.candidates.labels) if j not in self.retained)

    def block_members(self, block: str) -> Tuple[np.ndarray, np.ndarray]:
        """For an h̃₁ block: (positions among retained columns, matching columns of ṽₜ)"""
        first = self.blocks.index(block)
        positions, members = [], []
        for k, j in enumerate(self.retained):
            if self.blocks[j] == block:
                positions.append(k)
                members.append(j - first)
        return np.array(positions, dtype=int), np.array(members, dtype=int)

    def v(self, group: int) -> DesignMatrix:
        return self.v1 if group == 1 else self.v0


@dataclass(frozen=True)
class ControlVariates:
    """η̃ₜ, ξ̃₁ (ξ̃₀ = -ξ̃₁) and ζ̃ₜ evaluated on every row"""

    eta0: np.ndarray
    eta1: np.ndarray
    xi: np.ndarray
    zeta0: np.ndarray
    zeta1: np.ndarray
    tilde_pi: np.ndarray
    t: np.ndarray

    @property
    def xi0(self) -> np.ndarray:
        return -self.xi

    def eta(self, group: int, y: Optional[np.ndarray] = None) -> np.ndarray:
        """η̃ₜ, optionally with y in place of the observed outcome"""
        if y is None:
            return self.eta1 if group == 1 else self.eta0
        if group == 1:
            return self.t * y
        return (1 - self.t) * self.tilde_pi * y / (1 - self.tilde_pi)

    def xi_for(self, group: int) -> np.ndarray:
        return self.xi if group == 1 else self.xi0

    def zeta(self, group: int) -> np.ndarray:
        return self.zeta1 if group == 1 else self.zeta0


def _target_block(tilde_pi: np.ndarray, fitted: OutcomeFit, c: Optional[DesignMatrix], group: int) -> DesignMatrix:
    """ṽₜ = (π̃, π̃ m̂ₜ), or π̃ cₜ when calibration targets are given"""
    if c is None:
        values = np.column_stack([tilde_pi, tilde_pi * fitted.m_hat])
        labels = ("pi", f"pi*m{group}_hat")
    else:
        values = tilde_pi[:, None] * c.values
        labels = tuple(f"pi*c{group}:{l}" for l in c.labels)
    return DesignMatrix(values, labels, (TRANSFORM,) * len(labels))


def build_tilde_h(aug: AugmentedPSFit, or0: OutcomeFit, or1: OutcomeFit, data: Dataset,
                  include_h2: bool = True, c0: Optional[DesignMatrix] = None,
                  c1: Optional[DesignMatrix] = None) -> Tuple[TildeH, ControlVariates]:
    """Assemble h̃ with redundancy elimination and its control variates"""
    pi = aug.tilde_pi
    t = data.t
    if (c0 is None) != (c1 is None):
        raise StructuralError("Calibration targets must be given for both arms or neither")
    v1 = _target_block(pi, or1, c1, 1)
    v0 = _target_block(pi, or0, c0, 0)

    h1_1 = v1.scaled(1 - pi, prefix="(1-pi)*")
    h1_0 = v0.scaled(pi, prefix="pi*")
    candidates = h1_1.hstack(h1_0)
    blocks = (H1_TREATED,) * h1_1.n_cols + (H1_CONTROL,) * h1_0.n_cols
    if include_h2:
        base = aug.base
        if base.link is Link.LOGISTIC:
            # π̃(1-π̃)·1 is already the first column of h̃₁
            f = base.design.non_constant() if base.design.n_cols > 1 else None
        else:
            f = base.design.scaled(base.rho, prefix="rho*")
        h2 = or0.as_design() if f is None else f.hstack(or0.as_design())
        h2 = h2.scaled(pi * (1 - pi), prefix="pi(1-pi)*")
        candidates = candidates.hstack(h2)
        blocks = blocks + (H2,) * h2.n_cols

    retained = detect_redundancy(candidates)
    if not retained:
        raise StructuralError("Every calibration regressor is redundant")
    dropped = [l for j, l in enumerate(candidates.labels) if j not in retained]
    if dropped:
        logger.debug("h~ dropped redundant columns %s", dropped)
    tilde_h = TildeH(candidates=candidates, blocks=blocks, retained=retained,
                     v0=v0, v1=v1, tilde_pi=pi)

    h = tilde_h.values
    odds_scale = pi * (1 - pi)
    xi = ((t - pi) / odds_scale)[:, None] * h
    zeta1 = (t / odds_scale)[:, None] * h
    zeta0 = ((1 - t) / odds_scale)[:, None] * h
    cv = ControlVariates(eta0=(1 - t) * pi * data.y / (1 - pi), eta1=t * data.y,
                         xi=xi, zeta0=zeta0, zeta1=zeta1, tilde_pi=pi, t=t)
    return tilde_h, cv
