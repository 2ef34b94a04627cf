import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from degradex.model import DEFAULT_NORMALIZATION, REFERENCE_PARAMS
from degradex.synth import ExperimentDesign, generate_dataset

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def norm():
    return DEFAULT_NORMALIZATION


@pytest.fixture(scope="session")
def reference_dataset():
    """The 8-level, 12-unit, 40-reading panel simulated from the reference parameters."""
    return generate_dataset(REFERENCE_PARAMS, "m0", ExperimentDesign(), DEFAULT_NORMALIZATION, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES: list = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one verdict line per acceptance criterion for the run summary."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
        terminalreporter.write_line(line)
