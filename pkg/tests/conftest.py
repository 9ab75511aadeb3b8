import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from magnomech.diffcore import DerivativeEngine
from magnomech.scenarios import load_builtin

settings.register_profile(
    "repo",
    deadline=None,
    max_examples=25,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("repo")

DUAL = DerivativeEngine("dual")
FD = DerivativeEngine("fd")


@pytest.fixture(scope="session")
def builtin():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = load_builtin(name)
        return cache[name]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def maxabs(x):
    return float(np.max(np.abs(np.asarray(x, dtype=float)), initial=0.0))


ACCEPTANCE_LINES = {}


def record_criterion(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
