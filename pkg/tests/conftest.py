import numpy as np
import pytest

from grum.model import AgentPool, AlternativeSet, NoiseModel, Parameters


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_model():
    """m = 3 alternatives, K = L = 1, unit noise."""
    params = Parameters(np.array([0.0, 0.5, -0.3]), np.array([[0.8]]))
    alts = AlternativeSet(np.array([[1.0], [-0.5], [0.2]]))
    agents = AgentPool(np.array([[0.3], [-1.2], [0.7], [1.5]]))
    return params, alts, agents, NoiseModel(1.0)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance(request):
    """Record one pass/fail line per acceptance criterion.

    Call ``acceptance(number, ok, detail)`` before asserting; the lines are
    printed in the terminal summary and immediately to stdout.
    """
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
