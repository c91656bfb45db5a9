import pytest


_criteria: list[tuple[str, bool, str]] = []


@pytest.fixture
def report():
    """Record one acceptance line and assert it."""

    def _report(name: str, ok: bool, detail: str = "") -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        print(line)
        _criteria.append((name, ok, detail))
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _criteria:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
