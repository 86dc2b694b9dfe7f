import numpy as np
import pytest
from hypothesis import settings

from roughvol.fracproc import fou_simulate, rfsv_params

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def rfsv_daily_logvol(n_days: int, seed: int, steps_per_day: int = 8) -> np.ndarray:
    """Daily samples of the reference RFSV log-volatility."""
    path = fou_simulate(rfsv_params(n_days, steps_per_day, seed=seed))
    return path.values[::steps_per_day][:n_days]


@pytest.fixture(scope="session")
def rfsv_3500():
    return [rfsv_daily_logvol(3500, s) for s in range(20)]


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
