import numpy as np
import pytest

from mwsmpc.controller import MissionSpec
from mwsmpc.lqr import solve_dare
from mwsmpc.model import LinearSystem, Polytope

CASE_A = [[1.0, 1.0], [0.0, 1.0]]
CASE_B = [[0.5], [1.0]]
CASE_C = [[1, 0], [0, 1], [-1, 0], [0, -1]]
CASE_c = [-2, -2, -10, -2]
CASE_K = [[-0.6167, -1.2703]]
CASE_QN = [[2.0599, 0.5916], [0.5916, 1.4228]]


@pytest.fixture(scope="session")
def case_system():
    return LinearSystem(CASE_A, CASE_B, 0.04 * np.eye(2))


@pytest.fixture(scope="session")
def case_poly():
    return Polytope(CASE_C, CASE_c)


@pytest.fixture(scope="session")
def case_design():
    return solve_dare(CASE_A, CASE_B, np.eye(2), [[0.1]])


@pytest.fixture(scope="session")
def case_spec():
    return MissionSpec(n_mission=11, s0_bound=0.98, gammas=(0.99,) * 10, beta=1e-6,
                       q_cost=np.eye(2), r_cost=[[0.1]], sk_cap=0.995, mc_samples=10_000, seed=7)


# -- acceptance reporting: one PASS/FAIL line per criterion --

_CRITERIA = []


def record_criterion(name, passed, detail=""):
    _CRITERIA.append((name, passed, detail))


@pytest.fixture
def criterion(request):
    """Record a PASS/FAIL line: ``with criterion("name") as rec: ...; rec.detail = "..."``."""

    class _Rec:
        detail = ""

    class _Ctx:
        def __init__(self, name):
            self.name = name
            self.rec = _Rec()

        def __enter__(self):
            return self.rec

        def __exit__(self, exc_type, exc, tb):
            record_criterion(self.name, exc_type is None, self.rec.detail)
            return False

    return _Ctx


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _CRITERIA:
        line = f"{'PASS' if passed else 'FAIL'}  {name}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
