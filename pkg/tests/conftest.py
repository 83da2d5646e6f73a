"""Shared fixtures and the acceptance summary printed at the end of a run."""

import numpy as np
import pytest

from reachpc.core import LipschitzBounds, LocalModel, partition
from reachpc.plant import BicycleParams, Plant, reduced_rhs

_ACCEPTANCE: list[tuple[str, str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = dict(report.user_properties).get("detail", "")
        status = "PASS" if report.outcome == "passed" else "FAIL"
        _ACCEPTANCE.append((report.nodeid.split("::")[-1], status, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{status}  {name}  {detail}".rstrip())


@pytest.fixture
def identity_model():
    """a = 0, G = I, c = 3 at the anchor [0, 1]."""
    return LocalModel(partition([0.0, 1.0], 2), [0.0, 0.0], np.eye(2), [], c=3.0)


@pytest.fixture
def bounds_03():
    return LipschitzBounds(0.0, 3.0, 0.1)


def reduced_actuated_plant(x0=(0.0, 1.0), l_r=1.0, a_max=1.0, h=1e-3) -> Plant:
    """Actuated block of the small-angle bicycle: theta' = v u2 / l_r, v' = a_max u1."""
    params = BicycleParams(l_r=l_r, a_max=a_max)

    def rhs(z, u):
        return reduced_rhs(np.r_[z, 0.0, 0.0], u, params)[:2]

    return Plant(rhs, list(x0), m=2, h=h)
