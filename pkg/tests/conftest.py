import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from exactgate import synthesis
from exactgate.bipartite import BipartiteShape, cnot

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

SHAPE22 = BipartiteShape(2, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def cnot_alphabet():
    return synthesis.bipartite_alphabet(cnot(), SHAPE22)


@pytest.fixture(scope="session")
def cnot_chart_timed(cnot_alphabet):
    """Certified projective CNOT chart and neighbourhood, seed 1 (about 30 s, built once)."""
    t0 = time.perf_counter()
    ch, nb = synthesis.prepare(cnot_alphabet, "pu", seed=1)
    return ch, nb, time.perf_counter() - t0


@pytest.fixture(scope="session")
def cnot_chart(cnot_chart_timed):
    return cnot_chart_timed[:2]


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """``acceptance(criterion, ok, detail)`` prints one PASS/FAIL line and keeps it for the summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(criterion, ok, detail=""):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        print(line)
        lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
