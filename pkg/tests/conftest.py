import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from koopdmd.dynamics import Trajectory

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_acceptance = []


def linear_trajectory(A, x1, m, dt=0.1) -> Trajectory:
    """Samples of x_{k+1} = A x_k (brute-force iteration)."""
    A = np.asarray(A, dtype=float)
    states = [np.asarray(x1, dtype=float)]
    for _ in range(m - 1):
        states.append(A @ states[-1])
    return Trajectory(dt=dt, states=np.array(states))


def rotation(alpha):
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[c, -s], [s, c]])


@pytest.fixture
def diag_traj():
    return linear_trajectory(np.diag([0.9, 0.5]), [1.0, 1.0], m=10)


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
