import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from semitunnel.core import CoherentState, PhysicalSetup

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def setup():
    return PhysicalSetup()


@pytest.fixture
def free_setup():
    return PhysicalSetup(v0=1e-12)


@pytest.fixture
def state(setup):
    return CoherentState(-60.0, 1.0, setup)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = []


@pytest.fixture
def report():
    """Record one acceptance line: ``report(n, ok, detail)``."""

    def _report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
