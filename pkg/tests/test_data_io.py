import numpy as np
import numpy.testing as npt
import pandas as pd
import pytest

from src.data_io.bootstrap import (ROLE_COMPARISON, ROLE_CONTROL, ROLE_TREATMENT, Pool, bootstrap_analysis,
                                   lalonde_grid, project_grid)
from src.data_io.dataset import Arm, CSVSchema, Dataset, compose_analysis, load_csv
from src.errors import ConfigError, DataError, StructuralError
from src.estimation import ModelCombo
from src.models import RegressorSpec

SCHEMA = CSVSchema(outcome="y", treatment="t", covariates={"x": "x_raw"}, source="site")


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCSV:

    def test_typed_parse(self, tmp_path):
        path = write(tmp_path, "y,t,x_raw,site\n1.5,1,0.2,a\n2,0,0.4,b\n")
        data = load_csv(path, SCHEMA)
        npt.assert_allclose(data.y, [1.5, 2.0])
        assert list(data.X.columns) == ["x"]
        assert list(data.provenance) == ["a", "b"]

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(tmp_path / "absent.csv", SCHEMA)

    def test_missing_column(self, tmp_path):
        path = write(tmp_path, "y,t\n1,1\n")
        with pytest.raises(DataError, match="x_raw"):
            load_csv(path, SCHEMA)

    def test_unparsable_value_names_row(self, tmp_path):
        path = write(tmp_path, "y,t,x_raw\n1,1,0.2\n2,0,abc\n")
        with pytest.raises(DataError, match="row 2"):
            load_csv(path, SCHEMA)

    def test_missing_value(self, tmp_path):
        path = write(tmp_path, "y,t,x_raw\n1,1,0.2\n,0,0.3\n")
        with pytest.raises(DataError, match="missing values"):
            load_csv(path, SCHEMA)

    def test_treatment_not_binary(self, tmp_path):
        path = write(tmp_path, "y,t,x_raw\n1,1,0.2\n2,2,0.3\n")
        with pytest.raises(DataError, match="0/1"):
            load_csv(path, SCHEMA)

    def test_tag_without_source_column(self, tmp_path):
        path = write(tmp_path, "y,t,x_raw\n1,1,0.2\n2,0,0.3\n", name="nsw.csv")
        assert list(load_csv(path, SCHEMA).provenance) == ["nsw", "nsw"]
        assert list(load_csv(path, SCHEMA, tag="experimental").provenance) == ["experimental"] * 2


@pytest.fixture
def parts():
    experimental = Dataset([10.0, 11.0, 1.0, 2.0], [1, 1, 0, 0], pd.DataFrame({"x": [0.1, 0.2, 0.3, 0.4]}),
                           ["nsw"] * 4)
    comparison = Dataset([5.0, 6.0, 7.0], [0, 0, 0], pd.DataFrame({"x": [1.0, 2.0, 3.0]}), ["cps"] * 3)
    return experimental, comparison


class TestComposites:

    def test_treatment_arm(self, parts):
        data = compose_analysis(*parts, Arm.TREATMENT)
        npt.assert_array_equal(data.t, [1, 1, 0, 0, 0])
        npt.assert_array_equal(data.y, [10, 11, 5, 6, 7])

    def test_control_arm(self, parts):
        data = compose_analysis(*parts, "control")
        npt.assert_array_equal(data.t, [1, 1, 0, 0, 0])
        npt.assert_array_equal(data.y, [1, 2, 5, 6, 7])
        assert list(data.provenance) == ["nsw", "nsw", "cps", "cps", "cps"]

    def test_covariates_must_match(self, parts):
        experimental, comparison = parts
        other = Dataset(comparison.y, comparison.t, pd.DataFrame({"z": [1.0, 2.0, 3.0]}))
        with pytest.raises(StructuralError):
            compose_analysis(experimental, other, Arm.TREATMENT)

    def test_empty_arm(self, parts):
        experimental, comparison = parts
        treated_only = experimental.take([0, 1])
        with pytest.raises(StructuralError):
            compose_analysis(treated_only, comparison, Arm.CONTROL)


class TestPool:

    def test_roles(self, parts):
        pool = Pool.from_parts(*parts)
        assert list(pool.roles) == [ROLE_TREATMENT] * 2 + [ROLE_CONTROL] * 2 + [ROLE_COMPARISON] * 3

    def test_split_keeps_repeats(self, parts):
        pool = Pool.from_parts(*parts)
        experimental, comparison = pool.split(np.array([0, 0, 3, 5, 5, 6]))
        npt.assert_array_equal(experimental.y, [10, 10, 2])
        npt.assert_array_equal(experimental.t, [1, 1, 0])
        npt.assert_array_equal(comparison.y, [6, 6, 7])
        npt.assert_array_equal(comparison.t, [0, 0, 0])


def synthetic(seed):
    """Experimental sample with a known effect of 1 and a shifted comparison sample"""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((200, 2))
    t = rng.integers(0, 2, 200)
    experimental = Dataset(x @ [1.0, 0.5] + t + rng.standard_normal(200), t,
                           pd.DataFrame(x, columns=["a", "b"]), ["exp"] * 200)
    z = rng.standard_normal((300, 2)) + 0.3
    comparison = Dataset(z @ [1.0, 0.5] + rng.standard_normal(300), np.zeros(300),
                         pd.DataFrame(z, columns=["a", "b"]), ["obs"] * 300)
    return experimental, comparison


class TestBootstrap:

    def setup_method(self):
        self.spec = RegressorSpec.linear(("a", "b"))
        self.grid = [ModelCombo(self.spec, self.spec)]

    def test_paired_difference(self):
        experimental, comparison = synthetic(0)
        report = bootstrap_analysis(experimental, comparison, self.grid, ["OR", "IPW"], resamples=3,
                                    seed=4, progress=False)
        long = report.long
        assert sorted(long["resample"].unique()) == [0, 1, 2]
        npt.assert_allclose(long["difference"], long["effect"] - long["bias"])
        row = report.table.set_index("estimator").loc["OR"]
        assert row["resamples_used"] + row["failures"] == 3
        assert row["difference_mean"] == pytest.approx(row["effect_mean"] - row["bias_mean"])

    def test_same_seed_same_resamples(self):
        experimental, comparison = synthetic(1)
        first = bootstrap_analysis(experimental, comparison, self.grid, ["OR"], resamples=2, seed=9,
                                   progress=False)
        second = bootstrap_analysis(experimental, comparison, self.grid, ["OR"], resamples=2, seed=9,
                                    progress=False)
        pd.testing.assert_frame_equal(first.long, second.long)

    def test_benchmark_column(self):
        experimental, comparison = synthetic(2)
        report = bootstrap_analysis(experimental, comparison, self.grid, ["OR"], resamples=2, seed=1,
                                    benchmark=(1.0, 0.1), progress=False)
        row = report.table.iloc[0]
        assert row["effect_minus_benchmark"] == pytest.approx(row["effect_mean"] - 1.0)

    def test_zero_resamples(self):
        experimental, comparison = synthetic(0)
        with pytest.raises(ConfigError):
            bootstrap_analysis(experimental, comparison, self.grid, ["OR"], resamples=0, progress=False)

    def test_projection_shared_by_grid(self):
        experimental, comparison = synthetic(0)
        pool = Pool.from_parts(experimental, comparison)
        projected = project_grid(self.grid, pool.data.X, 0.05)
        assert projected[0].ps is projected[0].outcome
        assert projected[0].ps.projection is not None
        assert projected[0].label == self.grid[0].label

    def test_lalonde_grid(self):
        assert [c.label for c in lalonde_grid()] == ["PS:linear/OR:linear", "PS:quadratic/OR:quadratic"]
