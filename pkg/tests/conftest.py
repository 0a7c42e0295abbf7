import pytest

from gemsim import gem1d
from gemsim.core import MemoryConfig, Pulse, PulseSequence, load_config


@pytest.fixture(scope="session")
def settings():
    return load_config()


@pytest.fixture(scope="session")
def memory():
    """Default cell, symmetric gradients, absorption calibrated to 30 %."""
    mem = MemoryConfig.from_lab(5.0, 15.0, 2.0, 1.0, 0.30, 105.0)
    probe = PulseSequence((Pulse(-1.1e-6, 1.1e-6),))
    return gem1d.calibrate_optical_depth(mem, probe, 0.30)


# acceptance results, filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
