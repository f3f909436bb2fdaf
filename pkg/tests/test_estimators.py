import numpy as np
import numpy.testing as npt
import pandas as pd
import pytest

from src.data_io.dataset import Dataset
from src.errors import ConfigError, InfeasibleError, StructuralError, WeightError
from src.estimation import (AIPWFlavor, ControlVariates, EstimatorFailure, EstimatorOutput, Influence, LikVariant,
                            ModelCombo, build_tilde_h, evaluate_combo, hir_weights, influence_report, influence_values,
                            nu0_aipw, nu0_hir, nu0_ipw, nu1_aipw_sp, nu1_np, nu_or, nu_reg, prepare_calibration,
                            validate_estimators)
from src.estimation.weighting import aipw_sp_denominators, max_untreated_weight, tau0, untreated_odds
from src.models import AugVariant, RegressorSpec, fit_aug_ps, fit_or, fit_ps


class TestHandArithmetic:
    """Estimators on five rows with a fixed propensity vector, checked against arithmetic done by hand"""

    def test_nu1_np(self, tiny):
        assert nu1_np(tiny) == pytest.approx(5.0, abs=1e-12)

    def test_ipw(self, tiny, tiny_pi):
        # odds on untreated rows: 1, 1/3, 3
        assert nu0_ipw(tiny_pi, tiny) == pytest.approx(16 / 3, abs=1e-12)
        assert nu0_ipw(tiny_pi, tiny, ratio=True) == pytest.approx(32 / 13, abs=1e-12)

    def test_aipw_np(self, tiny, tiny_pi):
        m0 = np.full(5, 2.0)
        assert nu0_aipw(tiny_pi, m0, tiny, AIPWFlavor.NP) == pytest.approx(3.0, abs=1e-12)

    def test_aipw_sp(self, tiny, tiny_pi):
        m0 = np.full(5, 2.0)
        assert nu0_aipw(tiny_pi, m0, tiny, AIPWFlavor.SP) == pytest.approx(3.5, abs=1e-12)
        by_t, by_pi = aipw_sp_denominators(tiny_pi, m0, tiny)
        assert by_t == pytest.approx(3.5, abs=1e-12)
        assert by_pi == pytest.approx(2.8, abs=1e-12)

    def test_nu1_aipw_sp(self, tiny, tiny_pi):
        assert nu1_aipw_sp(tiny_pi, np.full(5, 5.0), tiny) == pytest.approx(6.25, abs=1e-12)

    def test_tau0_rows(self, tiny, tiny_pi):
        npt.assert_allclose(tau0(tiny_pi, np.full(5, 2.0), tiny), [2.0, 2.0, -1.0, 0.0, 3.0], atol=1e-12)

    def test_weights(self, tiny, tiny_pi):
        npt.assert_allclose(untreated_odds(tiny_pi, tiny.t), [0, 0, 1, 1 / 3, 3])
        assert max_untreated_weight(tiny_pi, tiny.t) == pytest.approx(4.0)

    def test_unit_propensity_on_untreated_row(self, tiny):
        with pytest.raises(WeightError) as info:
            nu0_ipw(np.array([0.5, 0.5, 0.5, 1.0, 0.5]), tiny)
        assert info.value.row == 3

    def test_outcome_regression(self, tiny, constant_spec):
        or0 = fit_or(constant_spec, tiny, 0)
        assert nu_or(or0, tiny) == pytest.approx(2.0, abs=1e-12)
        with pytest.raises(StructuralError):
            nu_or(or0, tiny, t=1)


class TestHIR:

    def test_intercept_only_reweights_to_control_mean(self, tiny, constant_spec):
        weights = hir_weights(tiny, constant_spec)
        npt.assert_allclose(weights.r[tiny.t == 0], 2 / 3, atol=1e-10)
        assert nu0_hir(weights, tiny) == pytest.approx(2.0, abs=1e-10)

    def test_balance(self, tiny):
        spec = RegressorSpec.linear(("x",))
        weights = hir_weights(tiny, spec)
        untreated = tiny.t == 0
        x = tiny.X["x"].to_numpy()
        assert np.sum(weights.r[untreated]) == pytest.approx(tiny.n1, abs=1e-9)
        assert np.sum(weights.r[untreated] * x[untreated]) == pytest.approx(x[~untreated].sum(), abs=1e-9)
        assert weights.balance_residual < 1e-9
        npt.assert_allclose(weights.breve_pi, weights.r / (1 + weights.r))

    def test_infeasible_balance(self):
        X = pd.DataFrame({"x": [2.0, 3.0, 0.0, 0.5, 1.0]})
        data = Dataset([1.0, 2.0, 3.0, 4.0, 5.0], [1, 1, 0, 0, 0], X)
        with pytest.raises(InfeasibleError):
            hir_weights(data, RegressorSpec.linear(("x",)))


class TestCalibration:

    @pytest.mark.parametrize("variant", list(LikVariant))
    def test_reg_calibration_identity(self, qz_fits, variant):
        data, ps, or0, or1 = qz_fits
        inputs = prepare_calibration(data, ps, or0, or1, variant, c_spec=RegressorSpec.linear(("X1", "X2")))
        for t, fit in ((0, or0), (1, or1)):
            part = nu_reg(inputs.cv, data, t, m_hat=fit.m_hat)
            assert part.calibration_residual < 1e-8

    def test_control_variate_symmetry(self, qz_fits):
        data, ps, or0, or1 = qz_fits
        aug = fit_aug_ps(ps, or0, or1, data, AugVariant.FULL)
        _, cv = build_tilde_h(aug, or0, or1, data)
        npt.assert_array_equal(cv.xi0, -cv.xi)
        npt.assert_allclose(cv.xi, cv.zeta1 - cv.tilde_pi[:, None] * (cv.zeta1 + cv.zeta0), atol=1e-10)

    def test_tilde_h_blocks(self, qz_fits):
        data, ps, or0, or1 = qz_fits
        aug = fit_aug_ps(ps, or0, or1, data, AugVariant.FULL)
        tilde_h, _ = build_tilde_h(aug, or0, or1, data)
        assert tilde_h.candidates.labels[:4] == ("(1-pi)*pi", "(1-pi)*pi*m1_hat", "pi*pi", "pi*pi*m0_hat")
        assert set(tilde_h.blocks) == {"h1_1", "h1_0", "h2"}
        positions, members = tilde_h.block_members("h1_1")
        npt.assert_array_equal(members, [0, 1])
        assert tilde_h.retained_blocks[:4] == ("h1_1", "h1_1", "h1_0", "h1_0")
        npt.assert_array_equal(positions, [0, 1])

    def test_collapsed_model_drops_fitted_h2_columns(self, qz_data, linear_spec):
        ps = fit_ps(linear_spec, qz_data)
        or0, or1 = fit_or(linear_spec, qz_data, 0), fit_or(linear_spec, qz_data, 1)
        aug = fit_aug_ps(ps, or0, or1, qz_data, AugVariant.FULL)
        assert aug.collapsed_to_base
        tilde_h, _ = build_tilde_h(aug, or0, or1, qz_data)
        assert "pi(1-pi)*m0_hat" in tilde_h.dropped_columns
        assert "pi(1-pi)*m0_hat" not in tilde_h.columns.labels
        assert "pi(1-pi)*X1" in tilde_h.columns.labels

    def test_xi_columns(self, qz_fits):
        # ξ̃ = (T - π̃)h̃/{π̃(1 - π̃)}: (T - π̃)(1, m̂₁) on h̃₁₁ and (T - π̃)(f₍₁₎, m̂₀) on h̃₂
        data, ps, or0, or1 = qz_fits
        aug = fit_aug_ps(ps, or0, or1, data, AugVariant.FULL)
        tilde_h, cv = build_tilde_h(aug, or0, or1, data)
        residual = data.t - aug.tilde_pi
        expected = {"(1-pi)*pi": np.ones(data.n), "(1-pi)*pi*m1_hat": or1.m_hat,
                    "pi*pi": aug.tilde_pi / (1 - aug.tilde_pi),
                    "pi*pi*m0_hat": aug.tilde_pi * or0.m_hat / (1 - aug.tilde_pi),
                    "pi(1-pi)*X1^2": data.X["X1"].to_numpy() ** 2, "pi(1-pi)*X2^2": data.X["X2"].to_numpy() ** 2,
                    "pi(1-pi)*m0_hat": or0.m_hat}
        labels = tilde_h.columns.labels
        assert set(labels) <= set(expected)
        for k, label in enumerate(labels):
            npt.assert_allclose(cv.xi[:, k], residual * expected[label], rtol=1e-10, atol=1e-12, err_msg=label)

    def test_reg_on_five_rows(self, tiny, tiny_pi):
        # one calibration column h̃ = π̃(1 - π̃): ξ̃₁ = T - π̃, ζ̃₁ = T, ζ̃₀ = 1 - T
        t, y, pi = tiny.t, tiny.y, tiny_pi
        h = (pi * (1 - pi))[:, None]
        cv = ControlVariates(eta0=(1 - t) * pi * y / (1 - pi), eta1=t * y,
                             xi=(t - pi)[:, None], zeta0=(1 - t)[:, None], zeta1=t[:, None],
                             tilde_pi=pi, t=t)
        npt.assert_allclose(cv.xi, ((t - pi) / (pi * (1 - pi)))[:, None] * h)
        treated = nu_reg(cv, tiny, 1)
        # β̃₁ = Σ(T - π̃)Ty / Σ(T - π̃)T = 5 / 1
        npt.assert_allclose(treated.beta, [5.0], atol=1e-12)
        assert treated.nu == pytest.approx(6.25, abs=1e-12)
        control = nu_reg(cv, tiny, 0)
        # β̃₀ = (89/12) / (3/2) and ν̃⁰ = {32/3 - (1/2)β̃₀} / 5 / 0.4
        npt.assert_allclose(control.beta, [89 / 18], atol=1e-12)
        assert control.nu == pytest.approx(295 / 72, abs=1e-12)
        assert not treated.degraded and not control.degraded

    def test_lik2_has_no_h2(self, qz_fits):
        data, ps, or0, or1 = qz_fits
        inputs = prepare_calibration(data, ps, or0, or1, LikVariant.LIK2)
        assert "h2" not in inputs.tilde_h.blocks

    def test_one_sided_targets(self, qz_fits):
        data, ps, or0, or1 = qz_fits
        aug = fit_aug_ps(ps, or0, or1, data, AugVariant.FULL)
        with pytest.raises(StructuralError):
            build_tilde_h(aug, or0, or1, data, c0=ps.design)


class TestRegistry:

    def test_validation(self):
        with pytest.raises(ConfigError):
            validate_estimators([])
        with pytest.raises(ConfigError):
            validate_estimators(["OR", "MAGIC"])
        assert validate_estimators(["LIK", "OR"]) == ("LIK", "OR")

    def test_constant_outcome_gives_zero_effect(self, qz_data, linear_spec, quadratic_spec):
        data = qz_data.with_outcome(np.full(qz_data.n, 3.0))
        names = ["OR", "IPW.ratio", "AIPW", "REG", "REG2", "LIK", "LIK2", "HIR", "AIPW.HIR"]
        for combo in (ModelCombo(linear_spec, linear_spec), ModelCombo(quadratic_spec, linear_spec)):
            results = evaluate_combo(data, combo, names)
            assert list(results) == names
            for name, output in results.items():
                assert isinstance(output, EstimatorOutput), (name, output)
                assert output.att == pytest.approx(0.0, abs=1e-8), name

    def test_failure_recorded_per_estimator(self, separated):
        spec = RegressorSpec.linear(("x",))
        results = evaluate_combo(separated, ModelCombo(spec, spec), ["OR", "IPW", "AIPW"])
        assert isinstance(results["OR"], EstimatorOutput)
        for name in ("IPW", "AIPW"):
            assert isinstance(results[name], EstimatorFailure)
            assert results[name].error_type == "SeparationError"

    def test_diagnostics(self, qz_fits, quadratic_spec, linear_spec):
        data = qz_fits[0]
        results = evaluate_combo(data, ModelCombo(quadratic_spec, linear_spec), ["REG", "LIK", "AIPW.SP", "HIR"])
        reg, lik, sp, hir = (results[k] for k in ("REG", "LIK", "AIPW.SP", "HIR"))
        assert {"reg_hat_nu0", "reg_hat_nu1", "calibration_residual0", "max_weight"} <= set(reg.diagnostics)
        assert lik.diagnostics["calibration_residual0"] < 1e-8
        assert lik.diagnostics["denominator_gap"] < 1e-8
        assert sp.diagnostics["sp_denominator_gap0"] < 1e-8
        assert hir.diagnostics["balance_residual"] < 1e-8
        record = lik.to_record()
        assert record["att"] == pytest.approx(lik.nu1 - lik.nu0)
        assert "diag.kappa0_residual" in record

    def test_parallel_outcome(self, qz_data, linear_spec):
        results = evaluate_combo(qz_data, ModelCombo(linear_spec, linear_spec), ["OR.parallel"])
        output = results["OR.parallel"]
        assert output.att == pytest.approx(output.diagnostics["intercept_gap"])


class TestInfluence:

    def test_report_keys(self, qz_data, linear_spec):
        ps = fit_ps(linear_spec, qz_data)
        or0, or1 = fit_or(linear_spec, qz_data, 0), fit_or(linear_spec, qz_data, 1)
        report = influence_report(qz_data, ps, or0, or1, nu0_aipw(ps.pi_hat, or0.m_hat, qz_data), nu1_np(qz_data))
        assert set(report) == {"NP0", "SPstar0", "SP0", "NP1", "SPstar1", "SP1", "ATT_NP", "ATT_SPstar", "ATT_SP"}
        assert all(v > 0 for v in report.values())

    def test_sp_forms(self, qz_data, linear_spec):
        ps = fit_ps(linear_spec, qz_data)
        or1 = fit_or(linear_spec, qz_data, 1)
        nu1 = nu1_np(qz_data)
        q = qz_data.n1 / qz_data.n
        np_form = influence_values(qz_data, ps.pi_hat, or1.m_hat, nu1, Influence.NP1)
        star = influence_values(qz_data, ps.pi_hat, or1.m_hat, nu1, Influence.SPSTAR1)
        npt.assert_allclose(np_form - star, (qz_data.t - ps.pi_hat) * (or1.m_hat - nu1) / q)
        with pytest.raises(StructuralError):
            influence_values(qz_data, ps.pi_hat, or1.m_hat, nu1, Influence.SP1)
