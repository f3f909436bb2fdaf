"""
Monte Carlo acceptance runs - minutes, not seconds; deselect with -m "not slow"
"""

import numpy as np
import pytest

from src.estimation import EstimatorFailure, ModelCombo, evaluate_combo, influence_report, nu0_aipw, nu1_np
from src.models import RegressorSpec, fit_or, fit_ps
from src.simulation.designs import Family, OutcomeSetting, SimDesign, gen_qin_zhang, spec_library
from src.simulation.monte_carlo import run_monte_carlo
from src.utils import replicate_generator

pytestmark = pytest.mark.slow

DOUBLY_ROBUST = ("AIPW", "LIK", "LIK2", "AIPW.HIR")


def unbiased(cell, slack=0.02):
    return abs(cell["bias"]) <= 3 * cell["mc_se"] + slack


@pytest.mark.parametrize("setting", list(OutcomeSetting))
def test_double_robustness(setting):
    design = SimDesign(Family.QIN_ZHANG, 1000, (1.0, 0.2, 0.2), setting)
    report = run_monte_carlo(design, 200, DOUBLY_ROBUST + ("OR",), seed=17, workers=2, progress=False)
    for combo in report.cells["combo"].unique():
        ps_correct = combo.startswith("PS:linear/")
        or_correct = setting is OutcomeSetting.LIN_OR and combo.endswith("/OR:linear")
        if ps_correct or or_correct:
            for name in DOUBLY_ROBUST:
                assert unbiased(report.cell(combo, name)), (setting, combo, name)
        if or_correct:
            assert unbiased(report.cell(combo, "OR"))
    if setting is OutcomeSetting.LIN_OR:
        assert not unbiased(report.cell("PS:linear/OR:quadratic", "OR"))


def test_intrinsic_efficiency():
    linear = RegressorSpec.linear(("X1", "X2"), name="linear")
    design = SimDesign(Family.QIN_ZHANG, 1000, (1.0, 0.2, 0.2), OutcomeSetting.QUA_OR)
    report = run_monte_carlo(design, 200, ("AIPW", "AIPW.HIR", "LIK"), [ModelCombo(linear, linear)],
                             seed=23, workers=2, progress=False)
    combo = "PS:linear/OR:linear"
    lik = report.cell(combo, "LIK")["variance"]
    assert lik / report.cell(combo, "AIPW")["variance"] <= 0.4
    assert lik / report.cell(combo, "AIPW.HIR")["variance"] <= 0.5


def test_kang_schafer():
    ps_specs, or_specs = spec_library(Family.KANG_SCHAFER)
    grid = [ModelCombo(ps_specs["z"], or_specs["z"]), ModelCombo(ps_specs["x"], or_specs["x"])]
    report = run_monte_carlo(SimDesign(Family.KANG_SCHAFER, 1000), 1000, ("AIPW", "LIK"), grid,
                             seed=31, workers=2, progress=False)
    for name in ("AIPW", "LIK"):
        assert unbiased(report.cell("PS:z/OR:z", name), slack=0.05)
    for name, target in (("AIPW", -6.16), ("LIK", -4.80)):
        cell = report.cell("PS:x/OR:x", name)
        assert abs(cell["mean"] - target) <= 0.3 + 3 * cell["mc_se"], (name, cell["mean"])


def test_sample_boundedness():
    quadratic = RegressorSpec.quadratic(("X1", "X2"), ("X1", "X2"), name="full")
    linear = RegressorSpec.linear(("X1", "X2"))
    combo = ModelCombo(quadratic, linear, c_spec=linear)
    converged = 0
    for i in range(300):
        rng = replicate_generator(41, i)
        data = gen_qin_zhang(300, (1.0, 0.5, 0.5), OutcomeSetting.QUA_OR, rng)
        if i % 2:
            data = data.with_outcome((data.y > np.median(data.y)).astype(float))
        for name, result in evaluate_combo(data, combo, ["LIK", "LIK2", "LIK.cal"]).items():
            if isinstance(result, EstimatorFailure):
                assert "outside the arm outcome range" not in result.message
                continue
            converged += 1
            for t, nu in ((0, result.nu0), (1, result.nu1)):
                arm = data.y[data.t == t]
                assert arm.min() - 1e-9 <= nu <= arm.max() + 1e-9, (i, name, t)
    assert converged > 0


def test_influence_ordering():
    linear = RegressorSpec.linear(("X1", "X2"))
    held = 0
    replicates = 100
    for i in range(replicates):
        data = gen_qin_zhang(1000, (1.0, 0.2, 0.2), OutcomeSetting.LIN_OR, replicate_generator(53, i))
        ps = fit_ps(linear, data)
        or0, or1 = fit_or(linear, data, 0), fit_or(linear, data, 1)
        report = influence_report(data, ps, or0, or1, nu0_aipw(ps.pi_hat, or0.m_hat, data), nu1_np(data))
        held += report["NP0"] >= report["SP0"] >= report["SPstar0"]
    assert held >= 0.95 * replicates
