"""Shared test fixtures and the acceptance-report summary hook."""

import pytest

# (label, passed, detail) tuples appended by the acceptance tests; printed
# as one line per criterion in the terminal summary.
ACCEPTANCE_RESULTS = []


def record_acceptance(label, passed, detail):
    ACCEPTANCE_RESULTS.append((label, bool(passed), detail))


@pytest.fixture(scope="session")
def acceptance_report():
    """Callable (label, passed, detail) collecting acceptance outcomes."""
    return record_acceptance


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {label}: {status} - {detail}")
