import numpy as np
import pytest

_CRITERIA = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20140622)


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(n, title, passed, detail)``."""
    def record(n, title, passed, detail=""):
        _CRITERIA[n] = (title, bool(passed), detail)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, passed, detail = _CRITERIA[n]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {n}. {title}" + (f" -- {detail}" if detail else ""))
