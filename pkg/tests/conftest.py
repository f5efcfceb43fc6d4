from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"

# filled by test_acceptance, reported at the end of the session
ACCEPTANCE_RESULTS = []


@pytest.fixture
def data_dir():
    return DATA


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, text in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {text}")
