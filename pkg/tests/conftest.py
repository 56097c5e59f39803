import numpy as np
import pytest
from hypothesis import settings

from hoboost.data import Dataset, make_synthetic, split_dataset

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")


@pytest.fixture
def four_rows():
    """One feature [1, 2, 3, 4]; labels set so squared-error residuals are [-1, -1, 1, 1] at 0."""
    return Dataset.from_rows([[1.0], [2.0], [3.0], [4.0]], [1.0, 1.0, -1.0, -1.0])


@pytest.fixture(scope="session")
def small_synthetic():
    return split_dataset(make_synthetic(600, 5, seed=7), seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
