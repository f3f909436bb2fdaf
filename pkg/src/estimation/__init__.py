# ATT estimators
from src.estimation.bundle import (DEFAULT_ESTIMATORS, ESTIMATORS, EstimatorFailure, ModelCombo, OrForm,
                                   evaluate_combo, validate_estimators)
from src.estimation.el_solver import (KappaRefit, LikEstimate, OmegaState, maximize_ell, maximize_kappa,
                                      nu_lik_hat, nu_lik_tilde)
from src.estimation.influence import Influence, influence_report, influence_values, influence_variance
from src.estimation.likelihood import LikVariant, lik_estimator, prepare_calibration
from src.estimation.regression import nu_reg
from src.estimation.results import EstimatorKind, EstimatorOutput
from src.estimation.tilde_h import ControlVariates, TildeH, build_tilde_h
from src.estimation.weighting import (AIPWFlavor, HIRWeights, hir_weights, nu0_aipw, nu0_hir, nu0_ipw,
                                      nu1_aipw_sp, nu1_np, nu_or)
