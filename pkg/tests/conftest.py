import copy
import warnings

import numpy as np
import pytest

from pkgwave.config import ScenarioConfig
from pkgwave.scenario import simulate_sparams
from pkgwave.sparams import SParameterSet

ACCEPTANCE_LINES = pytest.StashKey[list]()

# 6 mm die, two ports, coarse cells: a full package solve in about a second.
SMALL = {
    "package": {"chip_lateral": 6e-3, "carrier_lateral": 8e-3},
    "ports": {"cols": 2},
    "solver": {"cells_per_wavelength": 10, "energy_decay": 1e-4, "max_steps": 40000},
}


@pytest.fixture
def small_dict():
    return copy.deepcopy(SMALL)


@pytest.fixture(scope="session")
def small_config():
    return ScenarioConfig.from_dict(copy.deepcopy(SMALL))


@pytest.fixture(scope="session")
def small_result(small_config):
    cfg = small_config
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return simulate_sparams(cfg.build_model(), dim=cfg.dim, policy=cfg.policy(),
                                settings=cfg.run_settings(), frequencies=cfg.frequencies())


def random_sset(n_ports=3, n_freq=5, seed=0, scale=0.3):
    rng = np.random.default_rng(seed)
    f = 55e9 + 2.5e9 * np.arange(n_freq)
    s = scale * (rng.standard_normal((n_freq, n_ports, n_ports))
                 + 1j * rng.standard_normal((n_freq, n_ports, n_ports)))
    return SParameterSet(f, s)


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    def record(number, name, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {name} ({detail})"
        request.config.stash[ACCEPTANCE_LINES].append(line)
        print(line)
        return passed
    return record
