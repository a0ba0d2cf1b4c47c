import numpy as np
import pytest

from softmdp.mdp import TabularMdp

_ACCEPTANCE_LINES = []


@pytest.fixture
def one_action():
    """Single state, single action, reward 1, gamma 0.5: V* = 2 under any regularizer."""
    return TabularMdp([[1.0]], [[[1.0]]], 0.5)


@pytest.fixture
def symmetric():
    """Single state, two zero-reward self-loop actions, gamma 0.5."""
    return TabularMdp([[0.0, 0.0]], [[[1.0], [1.0]]], 0.5)


@pytest.fixture
def acceptance_record():
    def record(number, name, ok, detail):
        status = "PASS" if ok else "FAIL"
        _ACCEPTANCE_LINES.append(f"[{status}] criterion {number:>2}: {name} ({detail})")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_v(rng, n, scale=5.0):
    return rng.uniform(-scale, scale, n)


def assert_stochastic(pi, atol=1e-9):
    pi = np.asarray(pi)
    assert np.all(pi >= 0)
    np.testing.assert_allclose(pi.sum(axis=1), 1.0, rtol=0, atol=atol)
