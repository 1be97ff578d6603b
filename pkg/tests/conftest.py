import pytest

ACCEPTANCE = []


@pytest.fixture
def criterion(request):
    """Record ``(label, passed, detail)`` for the end-of-run acceptance table."""
    def report(label, passed, detail=""):
        ACCEPTANCE.append((label, bool(passed), detail))
        return passed
    return report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")
