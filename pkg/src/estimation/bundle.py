"""
Estimator registry - evaluate a list of named estimators on one (PS spec, OR spec) combination

Fits shared between estimators (base PS, both OR fits, augmented models, h̃)
are computed once per combination. A CalibattError inside one estimator is
recorded as an EstimatorFailure for that estimator only.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Iterable, Optional, Sequence, Union

from src.data_io.dataset import Dataset
from src.errors import CalibattError, ConfigError
from src.estimation.likelihood import CalibrationInputs, LikVariant, lik_from_inputs, prepare_calibration
from src.estimation.regression import nu_reg
from src.estimation.results import EstimatorKind, EstimatorOutput
from src.estimation.weighting import (AIPWFlavor, aipw_sp_denominators, hir_weights, max_untreated_weight,
                                      nu0_aipw, nu0_hir, nu0_ipw, nu1_aipw_sp, nu1_np, nu_or)
from src.models.augmented import AugVariant, CSpec, fit_aug_ps
from src.models.outcome import fit_or, fit_or_parallel
from src.models.propensity import Link, fit_ps
from src.models.regressors import RegressorSpec

logger = logging.getLogger(__name__)


class OrForm(str, Enum):
    SEPARATE = "separate"
    PARALLEL = "parallel"


@dataclass(frozen=True)
class ModelCombo:
    """One cell of the PS × OR grid"""

    ps: RegressorSpec
    outcome: RegressorSpec
    link: Link = Link.LOGISTIC
    or_form: OrForm = OrForm.SEPARATE
    c_spec: Optional[CSpec] = None

    @property
    def label(self) -> str:
        return f"PS:{self.ps.name}/OR:{self.outcome.name}"


@dataclass(frozen=True)
class EstimatorFailure:
    name: str
    error_type: str
    message: str

    def to_record(self):
        return {"estimator": self.name, "error_type": self.error_type, "message": self.message}


class _ComboContext:
    """Lazy per-combination cache; a failed fit is cached and re-raised for every dependant"""

    def __init__(self, data: Dataset, combo: ModelCombo):
        self.data = data
        self.combo = combo
        self._cache: Dict[str, object] = {}

    def _get(self, key: str, builder: Callable[[], object]):
        if key in self._cache:
            value = self._cache[key]
            if isinstance(value, CalibattError):
                raise value
            return value
        try:
            value = builder()
        except CalibattError as e:
            self._cache[key] = e
            raise
        self._cache[key] = value
        return value

    @property
    def ps(self):
        return self._get("ps", lambda: fit_ps(self.combo.ps, self.data, self.combo.link))

    @property
    def outcome(self):
        def build():
            if self.combo.or_form is OrForm.PARALLEL:
                return fit_or_parallel(self.combo.outcome, self.data)
            return fit_or(self.combo.outcome, self.data, 0), fit_or(self.combo.outcome, self.data, 1)
        return self._get("or", build)

    @property
    def parallel_outcome(self):
        return self._get("or_parallel", lambda: fit_or_parallel(self.combo.outcome, self.data))

    @property
    def aug(self):
        or0, or1 = self.outcome
        return self._get("aug", lambda: fit_aug_ps(self.ps, or0, or1, self.data, AugVariant.FULL))

    def calibration(self, variant: LikVariant) -> CalibrationInputs:
        or0, or1 = self.outcome
        return self._get(f"cal:{variant.value}", lambda: prepare_calibration(
            self.data, self.ps, or0, or1, variant, c_spec=self.combo.c_spec))

    @property
    def hir(self):
        return self._get("hir", lambda: hir_weights(self.data, self.combo.ps))


def _or(ctx: _ComboContext) -> EstimatorOutput:
    or0, or1 = ctx.outcome
    return EstimatorOutput("OR", nu_or(or0, ctx.data), nu_or(or1, ctx.data), EstimatorKind.OUTCOME_REGRESSION)


def _or_parallel(ctx: _ComboContext) -> EstimatorOutput:
    or0, or1 = ctx.parallel_outcome
    effect = float(or1.coefficients[0] - or0.coefficients[0])
    nu1 = nu1_np(ctx.data)
    return EstimatorOutput("OR.parallel", nu1 - effect, nu1, EstimatorKind.OUTCOME_REGRESSION,
                           {"intercept_gap": effect})


def _ipw_family(name: str, ratio: bool, augmented: bool):
    def estimate(ctx: _ComboContext) -> EstimatorOutput:
        pi = ctx.aug.tilde_pi if augmented else ctx.ps.pi_hat
        return EstimatorOutput(name, nu0_ipw(pi, ctx.data, ratio=ratio), nu1_np(ctx.data), EstimatorKind.IPW,
                               {"max_weight": max_untreated_weight(pi, ctx.data.t)})
    return estimate


def _aipw(name: str, augmented: bool):
    def estimate(ctx: _ComboContext) -> EstimatorOutput:
        or0, _ = ctx.outcome
        pi = ctx.aug.tilde_pi if augmented else ctx.ps.pi_hat
        return EstimatorOutput(name, nu0_aipw(pi, or0.m_hat, ctx.data, AIPWFlavor.NP), nu1_np(ctx.data),
                               EstimatorKind.AIPW, {"max_weight": max_untreated_weight(pi, ctx.data.t)})
    return estimate


def _aipw_sp(ctx: _ComboContext) -> EstimatorOutput:
    or0, or1 = ctx.outcome
    pi, data = ctx.ps.pi_hat, ctx.data
    by_t, by_pi = aipw_sp_denominators(pi, or0.m_hat, data)
    nu1 = nu1_aipw_sp(pi, or1.m_hat, data)
    nu1_by_pi = nu1 * (data.n1 / data.n) / float(pi.mean())
    return EstimatorOutput("AIPW.SP", by_t, nu1, EstimatorKind.AIPW,
                           {"max_weight": max_untreated_weight(pi, data.t),
                            "sp_denominator_gap0": abs(by_t - by_pi),
                            "sp_denominator_gap1": abs(nu1 - nu1_by_pi)})


def _reg(name: str, variant: LikVariant):
    def estimate(ctx: _ComboContext) -> EstimatorOutput:
        inputs = ctx.calibration(variant)
        or0, or1 = ctx.outcome
        parts = {t: nu_reg(inputs.cv, ctx.data, t, m_hat=m.m_hat) for t, m in ((0, or0), (1, or1))}
        diagnostics = {"max_weight": max_untreated_weight(inputs.aug.tilde_pi, ctx.data.t),
                       "h_columns": len(inputs.tilde_h.retained)}
        for t, part in parts.items():
            diagnostics[f"calibration_residual{t}"] = part.calibration_residual
            diagnostics[f"reg_hat_nu{t}"] = part.nu_uncalibrated
            diagnostics[f"degraded{t}"] = part.degraded
        return EstimatorOutput(name, parts[0].nu, parts[1].nu, EstimatorKind.REGRESSION, diagnostics)
    return estimate


def _lik(name: str, variant: LikVariant):
    def estimate(ctx: _ComboContext) -> EstimatorOutput:
        inputs = ctx.calibration(variant)
        or0, or1 = ctx.outcome
        result = lik_from_inputs(inputs, ctx.data, or0, or1)
        diagnostics = dict(result.diagnostics)
        diagnostics["max_weight"] = max_untreated_weight(inputs.aug.tilde_pi, ctx.data.t)
        diagnostics["h_columns"] = len(inputs.tilde_h.retained)
        return EstimatorOutput(name, result.nu0, result.nu1, EstimatorKind.LIKELIHOOD, diagnostics)
    return estimate


def _hir(ctx: _ComboContext) -> EstimatorOutput:
    weights = ctx.hir
    return EstimatorOutput("HIR", nu0_hir(weights, ctx.data), nu1_np(ctx.data), EstimatorKind.BALANCING,
                           {"balance_residual": weights.balance_residual, "iterations": weights.iterations})


def _aipw_hir(ctx: _ComboContext) -> EstimatorOutput:
    weights = ctx.hir
    or0, _ = ctx.outcome
    return EstimatorOutput("AIPW.HIR", nu0_aipw(weights.breve_pi, or0.m_hat, ctx.data, AIPWFlavor.NP),
                           nu1_np(ctx.data), EstimatorKind.BALANCING,
                           {"balance_residual": weights.balance_residual})


ESTIMATORS: Dict[str, Callable[[_ComboContext], EstimatorOutput]] = {
    "OR": _or,
    "OR.parallel": _or_parallel,
    "IPW": _ipw_family("IPW", ratio=False, augmented=False),
    "IPW.ratio": _ipw_family("IPW.ratio", ratio=True, augmented=False),
    "AIPW": _aipw("AIPW", augmented=False),
    "AIPW.SP": _aipw_sp,
    "AIPW.aug": _aipw("AIPW.aug", augmented=True),
    "IPW.aug": _ipw_family("IPW.aug", ratio=False, augmented=True),
    "IPW.ratio.aug": _ipw_family("IPW.ratio.aug", ratio=True, augmented=True),
    "REG": _reg("REG", LikVariant.LIK),
    "REG2": _reg("REG2", LikVariant.LIK2),
    "REG.cal": _reg("REG.cal", LikVariant.LIK_CAL),
    "LIK": _lik("LIK", LikVariant.LIK),
    "LIK2": _lik("LIK2", LikVariant.LIK2),
    "LIK.cal": _lik("LIK.cal", LikVariant.LIK_CAL),
    "HIR": _hir,
    "AIPW.HIR": _aipw_hir,
}

# the columns of the simulation tables
DEFAULT_ESTIMATORS = ("OR", "IPW", "IPW.ratio", "AIPW", "REG", "REG2", "LIK", "LIK2", "HIR", "AIPW.HIR")


def validate_estimators(names: Iterable[str]) -> tuple:
    names = tuple(names)
    if not names:
        raise ConfigError("At least one estimator must be listed")
    unknown = [n for n in names if n not in ESTIMATORS]
    if unknown:
        raise ConfigError(f"Unknown estimators {unknown}; choose from {list(ESTIMATORS)}")
    return names


def evaluate_combo(data: Dataset, combo: ModelCombo,
                   estimators: Sequence[str] = DEFAULT_ESTIMATORS
                   ) -> Dict[str, Union[EstimatorOutput, EstimatorFailure]]:
    """Every listed estimator on one dataset and model combination, in the listed order"""
    ctx = _ComboContext(data, combo)
    results = {}
    for name in validate_estimators(estimators):
        try:
            results[name] = ESTIMATORS[name](ctx)
        except CalibattError as e:
            logger.debug("%s failed on %s: %s", name, combo.label, e)
            results[name] = EstimatorFailure(name, type(e).__name__, str(e))
    return results
