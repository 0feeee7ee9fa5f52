import numpy as np
import pytest

from synthtest.data import Dataset, Feature, Schema
from synthtest.generator import fit_copula
from synthtest.groundtruth import GroundTruthSpec, simulate_ground_truth
from synthtest.predictors import fit_predictor


@pytest.fixture(scope="session")
def toy_schema():
    return Schema([
        Feature("x1", "continuous"),
        Feature("x2", "continuous"),
        Feature("color", "categorical", ("red", "green", "blue")),
        Feature("sex", "binary"),
        Feature("y", "binary"),
    ], label="y")


@pytest.fixture
def toy_rows():
    return [
        {"x1": 1.0, "x2": 10.0, "color": "red", "sex": "0", "y": "1"},
        {"x1": 2.0, "x2": 20.0, "color": "green", "sex": "1", "y": "0"},
        {"x1": 3.0, "x2": 30.0, "color": "red", "sex": "1", "y": "1"},
        {"x1": 4.0, "x2": 40.0, "color": "blue", "sex": "0", "y": "0"},
        {"x1": 5.0, "x2": 50.0, "color": "green", "sex": "0", "y": "1"},
    ]


@pytest.fixture
def toy(toy_schema, toy_rows):
    return Dataset.from_rows(toy_schema, toy_rows)


@pytest.fixture(scope="session")
def gt_spec():
    return GroundTruthSpec()


@pytest.fixture(scope="session")
def gt_data(gt_spec):
    return simulate_ground_truth(gt_spec, 6000, 0)


@pytest.fixture(scope="session")
def gt_train(gt_spec):
    return simulate_ground_truth(gt_spec, 4000, 1)


@pytest.fixture(scope="session")
def gt_model(gt_train):
    return fit_predictor("logistic", gt_train, seed=0)


@pytest.fixture(scope="session")
def gt_gen(gt_data):
    return fit_copula(gt_data, lam=0.05, seed=0)


def gaussian_pair(n, rho, seed, label_from=0):
    """Two correlated standard normals plus a label thresholding one of them."""
    schema = Schema([Feature("a", "continuous"), Feature("b", "continuous"), Feature("y", "binary")], "y")
    rng = np.random.default_rng(seed)
    z = rng.multivariate_normal([0, 0], [[1, rho], [rho, 1]], size=n)
    y = (z[:, label_from] > 0).astype(float)
    return Dataset(schema, np.column_stack([z, y]))


CRITERIA = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(name, passed, detail)``; shown in the terminal summary."""
    def record(name, passed, detail):
        request.config.stash.setdefault(CRITERIA, []).append((name, bool(passed), detail))
        return passed
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(CRITERIA, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in lines:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
