import numpy as np
import pytest

from v2x_alloc.allocator import pair_channel
from v2x_alloc.channel import generate_scenario
from v2x_alloc.scenario_file import default_scenario_path, load_scenario

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def highway():
    return load_scenario(default_scenario_path())


@pytest.fixture(scope="session")
def highway_gains(highway):
    return generate_scenario(highway)


@pytest.fixture(scope="session")
def highway_pairs(highway, highway_gains):
    """A handful of realistic pair channels from the bundled drop."""
    rng = np.random.default_rng(5)
    idx = [(int(rng.integers(20)), int(rng.integers(20))) for _ in range(8)]
    return [pair_channel(highway_gains, highway, m, k) for m, k in idx]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
