import os

import numpy as np
import pytest

from hetdraf.data import Dataset, load_csv

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")

# filled by test_acceptance; printed once at the end of the session
ACCEPTANCE_LINES: dict = {}


def data_path(name: str) -> str:
    return os.path.join(DATA_DIR, name)


@pytest.fixture(scope="session")
def iris() -> Dataset:
    return load_csv(data_path("iris.csv"))


@pytest.fixture(scope="session")
def wine() -> Dataset:
    return load_csv(data_path("wine.csv"))


def toy_dataset(n=60, f=3, k=3, seed=0) -> Dataset:
    rng = np.random.default_rng(seed)
    y = np.arange(n) % k
    X = rng.normal(size=(n, f)) + y[:, None] * 1.5
    return Dataset(X, y, k)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
