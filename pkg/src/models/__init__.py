# Outcome, propensity and augmented propensity models
from src.models.augmented import AugmentedPSFit, AugVariant, fit_aug_ps, fit_aug_ps_general
from src.models.outcome import OutcomeFit, fit_or, fit_or_parallel
from src.models.propensity import PROBIT, Link, PropensityFit, fit_ps
from src.models.regressors import RegressorKind, RegressorSpec, Transform, build_regressors
