import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mdprm.envs import cycle_mdprm, laundry_gridworld, lower_bound_mdprm, random_mdprm

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def cycle6():
    return cycle_mdprm(6, 0.2)


@pytest.fixture(scope="session")
def laundry():
    return laundry_gridworld()


@pytest.fixture(scope="session")
def lower_bound():
    return lower_bound_mdprm(O=8, A=2, Q=5, D_target=200)


@pytest.fixture(scope="session")
def small_random():
    return random_mdprm(0)


def flip_chain(r0=1.0, r1=0.0):
    """Two states that swap deterministically under the single action."""
    from mdprm.cross_product import TabularMdp

    P = np.array([[[0.0, 1.0]], [[1.0, 0.0]]])
    return TabularMdp(P, np.array([[r0], [r1]]))


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one pass/fail line for an acceptance criterion."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
