"""
Shared fixtures - hand-arithmetic datasets and seeded Qin-Zhang samples
"""

import numpy as np
import pandas as pd
import pytest

from src.data_io.dataset import Dataset
from src.models import RegressorSpec, fit_or, fit_ps
from src.simulation.designs import gen_qin_zhang


@pytest.fixture
def tiny():
    """Two treated and three untreated rows"""
    X = pd.DataFrame({"x": [0.3, 0.5, 0.1, 0.4, 0.8]})
    return Dataset(y=[4.0, 6.0, 1.0, 2.0, 3.0], t=[1, 1, 0, 0, 0], X=X)


@pytest.fixture
def tiny_pi():
    return np.array([0.5, 0.5, 0.5, 0.25, 0.75])


@pytest.fixture
def constant_spec():
    return RegressorSpec.linear((), name="constant")


@pytest.fixture
def linear_spec():
    return RegressorSpec.linear(("X1", "X2"), name="linear")


@pytest.fixture
def quadratic_spec():
    return RegressorSpec.quadratic(squares=("X1", "X2"), name="quadratic")


@pytest.fixture
def qz_data():
    return gen_qin_zhang(1000, (1.0, 0.2, 0.2), "LIN-OR", rng=2024)


@pytest.fixture
def qz_quadratic_data():
    return gen_qin_zhang(1000, (1.0, 0.2, 0.2), "QUA-OR", rng=2025)


@pytest.fixture
def qz_fits(qz_quadratic_data, linear_spec, quadratic_spec):
    """Quadratic PS and linear OR fits on QUA-OR data; m̂ₜ is not in the span of f, so nothing collapses"""
    data = qz_quadratic_data
    return data, fit_ps(quadratic_spec, data), fit_or(linear_spec, data, 0), fit_or(linear_spec, data, 1)


@pytest.fixture
def separated():
    X = pd.DataFrame({"x": [-2.0, -1.0, 1.0, 2.0, -1.5, 1.5]})
    return Dataset(y=[1.0, 2.0, 3.0, 4.0, 1.5, 3.5], t=[0, 0, 1, 1, 0, 1], X=X)
