import numpy as np
import pytest

from pkmdyn.model import load_bundled
from pkmdyn.pkm_kinematics import home_configuration, solve_configuration
from pkmdyn.trajectory import random_trajectory

FIXTURES = ("gsp", "planar_3rrr")


@pytest.fixture(scope="session")
def gsp():
    return load_bundled("gsp")


@pytest.fixture(scope="session")
def planar():
    return load_bundled("planar_3rrr")


@pytest.fixture(scope="session", params=FIXTURES)
def any_model(request):
    return load_bundled(request.param)


def random_state(model, rng, t=None, amplitude=0.05):
    """(theta, task, trajectory, t) at a random reachable configuration."""
    theta0, home = home_configuration(model)
    traj = random_trajectory(home, model.P_p, rng, amplitude)
    t = float(rng.uniform(0.0, 1.0)) if t is None else t
    s = traj.sample(t)
    theta = solve_configuration(model, s.pose, theta0)
    return theta, s.task, traj, t


def rel(a, b, floor=1e-12):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b))) / max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), floor)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion."""

    def record(number, title, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title}: {detail}"
        request.config.stash[_ACCEPTANCE].append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
