import math

import numpy as np
import pytest

from decohere import DiscreteBath, ThermalParameters, UnitsContext

UNIT = UnitsContext(1.0)
ZERO_T = ThermalParameters(math.inf)


def random_bath(rng, n_modes, mass=None, omega=(0.3, 3.0), coupling=(0.2, 1.5)):
    m = float(rng.uniform(0.5, 2.0)) if mass is None else mass
    return DiscreteBath.from_arrays(rng.uniform(*omega, n_modes), rng.uniform(*coupling, n_modes), m)


def single_mode(g=1.0, omega=1.0, mass=1.0):
    return DiscreteBath.from_arrays([omega], [g], mass)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def five_mode_bath(rng):
    return random_bath(rng, 5)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[k])
