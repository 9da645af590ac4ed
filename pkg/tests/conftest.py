import numpy as np
import pytest

from mfris_sagin.config import desk_config


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def desk():
    return desk_config()


ACCEPTANCE = {}


def record(criterion: int, ok: bool, detail: str) -> bool:
    """Remember one acceptance verdict; printed at the end of the session."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion:>2}: {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
