import sys
import math

import numpy as np
import pytest

from geobound import catalog
from geobound.metric import MetricSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def euclidean(d):
    return MetricSpec(dim=d, components=lambda p, _d=d: np.eye(_d))


def polar_hyperbolic3():
    """ds^2 = dt^2 + sinh^2 t (dth^2 + sin^2 th dph^2), components only (no jet)."""
    def comps(p):
        s = math.sinh(p[0]) ** 2
        return np.diag([1.0, s, s * math.sin(p[1]) ** 2])
    return MetricSpec(dim=3, components=comps, base_point=np.array([1.0, 1.0, 0.0]))


@pytest.fixture(scope="session")
def h2xh2():
    return catalog.get("h2xh2")


@pytest.fixture(scope="session")
def squashed2():
    return catalog.get("squashed-h3", c=2.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
