import numpy as np
import numpy.testing as npt
import pandas as pd
import pytest

from src.data_io.dataset import Dataset
from src.errors import CalibattError, InfeasibleError, StructuralError
from src.estimation import (LikVariant, OmegaState, lik_estimator, maximize_ell, maximize_kappa, nu0_ipw, nu_lik_hat,
                            nu_lik_tilde, prepare_calibration)
from src.estimation.tilde_h import H1_CONTROL, H1_TREATED
from src.models import fit_or, fit_ps
from src.simulation.designs import gen_qin_zhang


@pytest.fixture
def solved(qz_fits):
    data, ps, or0, or1 = qz_fits
    inputs = prepare_calibration(data, ps, or0, or1, LikVariant.LIK)
    state = maximize_ell(inputs.aug.tilde_pi, inputs.tilde_h.values, data.t)
    return data, inputs, state, (or0, or1)


class TestMaximizeEll:

    def test_constant_column_by_hand(self, tiny):
        # ℓ(λ) = q log(½ + λ) + (1 - q) log(½ - λ) peaks where ω = q
        state = maximize_ell(np.full(5, 0.5), np.ones((5, 1)), tiny.t)
        npt.assert_allclose(state.omega, 0.4, atol=1e-10)
        npt.assert_allclose(state.lam, [-0.1], atol=1e-10)
        nu0, nu1 = nu_lik_hat(state, tiny)
        assert nu0 == pytest.approx(2.0, abs=1e-10)
        assert nu1 == pytest.approx(5.0, abs=1e-10)

    def test_two_rows_symmetric_start_is_optimal(self):
        data = Dataset(y=[3.0, 1.0], t=[1, 0], X=pd.DataFrame({"x": [0.0, 1.0]}))
        pi = np.full(2, 0.5)
        state = maximize_ell(pi, np.full((2, 1), 0.25), data.t)
        npt.assert_array_equal(state.lam, [0.0])
        npt.assert_allclose(state.omega, 0.5)
        assert state.iterations == 0
        nu0, nu1 = nu_lik_hat(state, data)
        assert nu0 == pytest.approx(nu0_ipw(pi, data, ratio=True))
        assert (nu0, nu1) == pytest.approx((1.0, 3.0))

    def test_ratio_form_on_four_rows(self):
        data = Dataset(y=[2.0, 4.0, 1.0, 3.0], t=[1, 1, 0, 0], X=pd.DataFrame({"x": [0.0, 1.0, 2.0, 3.0]}))
        pi = np.array([0.5, 0.4, 0.5, 0.2])
        h = np.array([0.2, 0.1, 0.2, 0.1])
        state = OmegaState(lam=np.array([0.5]), omega=pi + 0.5 * h, tilde_pi=pi, t=data.t)
        # ω = (0.6, 0.45, 0.6, 0.25): treated weights 5/6, 8/9 and untreated weights 5/4, 4/15
        nu0, nu1 = nu_lik_hat(state, data)
        assert nu0 == pytest.approx(123 / 91, abs=1e-12)
        assert nu1 == pytest.approx(94 / 31, abs=1e-12)
        flat = nu_lik_hat(state, data.with_outcome(np.full(4, 2.5)))
        assert flat == pytest.approx((2.5, 2.5), abs=1e-12)

    def test_stationarity(self, solved):
        data, inputs, state, _ = solved
        h = inputs.tilde_h.values
        slope = np.where(data.t == 1, 1 / state.omega, -1 / (1 - state.omega))
        gradient = h.T @ slope / data.n
        rms = np.sqrt(np.mean(h ** 2, axis=0))
        npt.assert_allclose(gradient / rms, 0.0, atol=1e-9)
        assert state.feasible

    def test_denominators_agree(self, solved):
        # π̃ lies in the span of h̃₁, so both ratio denominators estimate Ẽ(π̃)
        data, _, state, _ = solved
        pi = state.tilde_pi
        treated = np.mean(np.where(data.t == 1, pi / state.omega, 0.0))
        untreated = np.mean(np.where(data.t == 0, pi / (1 - state.omega), 0.0))
        assert treated == pytest.approx(untreated, abs=1e-8)

    def test_propensity_outside_unit_interval(self, tiny):
        with pytest.raises(StructuralError):
            maximize_ell(np.array([0.5, 1.0, 0.5, 0.5, 0.5]), np.ones((5, 1)), tiny.t)

    def test_infeasible_state(self, tiny):
        state = OmegaState(lam=np.zeros(1), omega=np.array([0.5, 0.5, 1.2, 0.5, 0.5]),
                           tilde_pi=np.full(5, 0.5), t=tiny.t)
        assert not state.feasible
        with pytest.raises(InfeasibleError):
            nu_lik_hat(state, tiny)


class TestKappa:

    def test_stationarity_residuals(self, solved):
        data, inputs, state, _ = solved
        for group in (0, 1):
            refit = maximize_kappa(state, inputs.tilde_h, group)
            assert refit.group == group
            assert refit.stationarity_residual < 1e-8
            R = data.t if group == 1 else 1 - data.t
            assert np.all(refit.omega_t[R == 1] > 0)

    @pytest.mark.parametrize("group", [0, 1])
    def test_refit_solves_its_stationarity_equation(self, solved, group):
        # rebuild ω(t, X; λ̃ᵗ) from λ̂ with the h̃₁ₜ block replaced, then check Ẽ[{Rₜ/ω - 1}ṽₜ] = 0
        data, inputs, state, _ = solved
        tilde_h = inputs.tilde_h
        refit = maximize_kappa(state, tilde_h, group)
        positions, _ = tilde_h.block_members(H1_TREATED if group == 1 else H1_CONTROL)
        others = np.ones(len(state.lam), dtype=bool)
        others[positions] = False
        pi = state.tilde_pi
        v = tilde_h.v(group).values
        block = ((1 - pi) if group == 1 else pi)[:, None] * v
        omega = pi + tilde_h.values[:, others] @ state.lam[others] + block @ refit.lambda_block
        omega_t = omega if group == 1 else 1 - omega
        npt.assert_allclose(refit.omega_t, omega_t, atol=1e-10)
        R = data.t if group == 1 else 1 - data.t
        equation = v.T @ (np.where(R == 1, 1 / omega_t, 0.0) - 1) / data.n
        npt.assert_allclose(equation / np.sqrt(np.mean(v ** 2, axis=0)), 0.0, atol=1e-8)

    def test_bad_group(self, solved):
        _, inputs, state, _ = solved
        with pytest.raises(StructuralError):
            maximize_kappa(state, inputs.tilde_h, 2)

    def test_lambda_must_match_retained_columns(self, solved):
        _, inputs, state, _ = solved
        short = OmegaState(lam=state.lam[:-1], omega=state.omega, tilde_pi=state.tilde_pi, t=state.t)
        with pytest.raises(StructuralError):
            maximize_kappa(short, inputs.tilde_h, 1)


class TestLikTilde:

    def test_effective_weights(self, solved):
        data, inputs, state, fits = solved
        refits = {g: maximize_kappa(state, inputs.tilde_h, g) for g in (0, 1)}
        estimate = nu_lik_tilde(state, refits, data, m_hats={0: fits[0].m_hat, 1: fits[1].m_hat})
        for group in (0, 1):
            weights = estimate.effective_weights(group)
            assert weights.sum() == pytest.approx(1.0)
            assert np.all(weights[data.t != group] == 0)
            assert np.all(weights >= 0)
        assert estimate.nu0 == pytest.approx(float(estimate.effective_weights(0) @ data.y))
        assert estimate.att == pytest.approx(estimate.nu1 - estimate.nu0)
        assert estimate.diagnostics["calibration_residual0"] < 1e-8

    @pytest.mark.parametrize("variant", list(LikVariant))
    def test_binary_outcome_stays_in_range(self, quadratic_spec, linear_spec, variant):
        solved = 0
        for seed in range(5):
            data = gen_qin_zhang(400, setting="QUA-OR", rng=seed)
            data = data.with_outcome((data.y > np.median(data.y)).astype(float))
            ps = fit_ps(quadratic_spec, data)
            or0, or1 = fit_or(linear_spec, data, 0), fit_or(linear_spec, data, 1)
            try:
                estimate = lik_estimator(data, ps, or0, or1, variant, c_spec=linear_spec)
            except CalibattError:
                continue
            solved += 1
            assert 0.0 <= estimate.nu0 <= 1.0
            assert 0.0 <= estimate.nu1 <= 1.0
        assert solved > 0

    def test_binary_outcome_bounded_over_many_seeds(self, quadratic_spec, linear_spec):
        variants = list(LikVariant)
        solved = 0
        for seed in range(120):
            data = gen_qin_zhang(200, setting="QUA-OR", rng=1000 + seed)
            data = data.with_outcome((data.y > np.median(data.y)).astype(float))
            ps = fit_ps(quadratic_spec, data)
            or0, or1 = fit_or(linear_spec, data, 0), fit_or(linear_spec, data, 1)
            try:
                estimate = lik_estimator(data, ps, or0, or1, variants[seed % 3], c_spec=linear_spec)
            except CalibattError as error:
                assert "outside the arm outcome range" not in str(error), seed
                continue
            solved += 1
            assert 0.0 <= estimate.nu0 <= 1.0, seed
            assert 0.0 <= estimate.nu1 <= 1.0, seed
        assert solved >= 30
