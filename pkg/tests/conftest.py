import pytest

_LINES = []


@pytest.fixture
def criterion(request):
    """Record one pass/fail line for an acceptance criterion, then assert it."""

    def check(name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        _LINES.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
