import numpy as np
import numpy.testing as npt
import pandas as pd
import pytest

from src.errors import ConfigError
from src.estimation import ModelCombo, evaluate_combo
from src.simulation.designs import (PRESETS, Family, OutcomeSetting, SimDesign, default_grid, gen_kang_schafer,
                                    gen_qin_zhang, kang_schafer_x, preset)
from src.simulation.monte_carlo import CELL_COLUMNS, boxplot_table, run_monte_carlo, summarize
from src.utils import replicate_generator


class TestGenerators:

    def test_qin_zhang_is_deterministic(self):
        a = gen_qin_zhang(50, rng=7)
        b = gen_qin_zhang(50, rng=7)
        npt.assert_array_equal(a.y, b.y)
        npt.assert_array_equal(a.t, b.t)
        pd.testing.assert_frame_equal(a.X, b.X)
        assert not np.array_equal(a.y, gen_qin_zhang(50, rng=8).y)

    def test_qin_zhang_columns(self):
        data = gen_qin_zhang(200, setting=OutcomeSetting.QUA_OR, rng=1)
        assert list(data.X.columns) == ["X1", "X2"]
        assert set(np.unique(data.t)) <= {0.0, 1.0}
        assert data.provenance[0] == "qin_zhang"

    def test_kang_schafer_transforms(self):
        x = kang_schafer_x(np.zeros((1, 4)))
        npt.assert_allclose(x, [[1.0, 10.0, 0.216, 400.0]])

    def test_kang_schafer_layout(self):
        data = gen_kang_schafer(100, rng=3)
        assert list(data.X.columns) == ["z1", "z2", "z3", "z4", "x1", "x2", "x3", "x4"]
        z = data.X[["z1", "z2", "z3", "z4"]].to_numpy()
        npt.assert_allclose(data.X[["x1", "x2", "x3", "x4"]].to_numpy(), kang_schafer_x(z))

    def test_mccaffrey_adds_interaction(self):
        plain = gen_kang_schafer(100, interaction=False, rng=4)
        mixed = gen_kang_schafer(100, interaction=True, rng=4)
        npt.assert_allclose(mixed.y - plain.y, 20 * plain.X["z1"] * plain.X["z2"])
        assert mixed.provenance[0] == "mccaffrey"


class TestDesigns:

    def test_validation(self):
        with pytest.raises(ConfigError):
            SimDesign(Family.QIN_ZHANG, n=1)
        with pytest.raises(ConfigError):
            SimDesign(Family.QIN_ZHANG, gamma_star=(1.0, 0.2))

    def test_true_att(self):
        assert SimDesign(Family.QIN_ZHANG).true_att == 2.0
        assert SimDesign(Family.KANG_SCHAFER).true_att == 0.0

    def test_presets(self):
        assert len(preset("qz-moderate").designs) == 2
        assert preset("kang-schafer").replicates == 5000
        assert set(PRESETS) == {"qz-weak", "qz-moderate", "qz-strong", "kang-schafer", "mccaffrey"}
        with pytest.raises(ConfigError):
            preset("qz-extreme")

    def test_default_grids(self):
        qz = default_grid(Family.QIN_ZHANG)
        assert [c.label for c in qz] == ["PS:linear/OR:linear", "PS:quadratic/OR:linear",
                                         "PS:linear/OR:quadratic", "PS:quadratic/OR:quadratic"]
        assert len(default_grid(Family.MCCAFFREY)) == 6


@pytest.fixture
def small_run(linear_spec):
    design = SimDesign(Family.QIN_ZHANG, n=200)
    grid = [ModelCombo(linear_spec, linear_spec)]
    return design, grid


class TestMonteCarlo:

    def test_worker_count_does_not_change_results(self, small_run):
        design, grid = small_run
        serial = run_monte_carlo(design, 3, ["OR", "IPW"], grid, seed=11, workers=1, progress=False)
        parallel = run_monte_carlo(design, 3, ["OR", "IPW"], grid, seed=11, workers=2, progress=False)
        pd.testing.assert_frame_equal(serial.cells, parallel.cells)
        pd.testing.assert_frame_equal(serial.long, parallel.long)

    def test_replicate_streams(self, small_run):
        design, grid = small_run
        report = run_monte_carlo(design, 2, ["OR"], grid, seed=5, progress=False)
        expected = evaluate_combo(design.generate(replicate_generator(5, 1)), grid[0], ["OR"])["OR"].att
        assert report.long.loc[report.long["replicate"] == 1, "att"].item() == pytest.approx(expected)
        assert list(report.cells.columns) == CELL_COLUMNS
        assert report.cells["replicates"].tolist() == [2]

    def test_wide_table(self, small_run):
        design, grid = small_run
        report = run_monte_carlo(design, 2, ["OR", "IPW"], grid, seed=5, progress=False)
        wide = report.wide_table()
        assert list(wide.columns) == ["design", "combo", "OR.bias", "OR.var", "IPW.bias", "IPW.var"]
        cell = report.cell(grid[0].label, "IPW")
        assert wide["IPW.bias"].item() == pytest.approx(cell["bias"])

    def test_rejected_inputs(self, small_run):
        design, grid = small_run
        with pytest.raises(ConfigError):
            run_monte_carlo([], 2, ["OR"], grid, progress=False)
        with pytest.raises(ConfigError):
            run_monte_carlo([design, design], 2, ["OR"], grid, progress=False)
        with pytest.raises(ConfigError):
            run_monte_carlo(design, 2, [], grid, progress=False)


class TestSummaries:

    def test_summarize_counts_failures(self):
        long = pd.DataFrame({"design": "d", "combo": "c", "estimator": "e",
                             "replicate": [0, 1, 2], "att": [1.0, 3.0, np.nan], "error": ["", "", "boom"]})
        row = summarize(long, {"d": 1.0}).iloc[0]
        assert row["replicates"] == 2
        assert row["failures"] == 1
        assert row["mean"] == pytest.approx(2.0)
        assert row["bias"] == pytest.approx(1.0)
        assert row["variance"] == pytest.approx(2.0)
        assert row["mc_se"] == pytest.approx(1.0)

    def test_boxplot(self):
        long = pd.DataFrame({"design": "d", "combo": "c", "estimator": "e", "att": np.arange(1.0, 10.0)})
        row = boxplot_table(long, limits=(2.0, 8.0)).iloc[0]
        assert (row["q1"], row["median"], row["q3"]) == (3.0, 5.0, 7.0)
        assert (row["whisker_low"], row["whisker_high"]) == (1.0, 9.0)
        assert (row["below_limit"], row["above_limit"]) == (1, 1)
        assert row["n"] == 9
