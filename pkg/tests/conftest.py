import os

import numpy as np
import pytest

from privfed.data import Dataset, load_csv

HERE = os.path.dirname(__file__)
PIMA_CSV = os.path.join(HERE, "data", "diabetes.csv")
FERNET_VECTORS = os.path.join(HERE, "vectors", "fernet")


@pytest.fixture(scope="session")
def pima_path():
    return PIMA_CSV


@pytest.fixture(scope="session")
def pima():
    return load_csv(PIMA_CSV)


def make_dataset(n0, n1, d=3, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(0, 1, (n0, d)), rng.normal(1.5, 1, (n1, d))])
    y = np.r_[np.zeros(n0, int), np.ones(n1, int)]
    return Dataset(X, y, tuple(f"f{i}" for i in range(d)), np.arange(n0 + n1))


@pytest.fixture
def small_ds():
    return make_dataset(40, 20)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
