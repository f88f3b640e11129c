import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_data(rng):
    """n=8, p=2 dataset with known propensities and both arms present."""
    from gpmix.core import validate_dataset

    n = 8
    x = rng.standard_normal((n, 2))
    w = np.array([1, 0, 1, 0, 1, 1, 0, 0])
    e = rng.uniform(0.2, 0.8, n)
    y = 1.0 + x[:, 0] + w * (2.0 + x[:, 1]) + 0.1 * rng.standard_normal(n)
    return validate_dataset(x, y, w, e)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
