import pytest

_LINES: dict[int, str] = {}


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion and return the verdict."""

    def record(criterion: int, ok: bool, detail: str) -> bool:
        line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _LINES[criterion] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_LINES):
            terminalreporter.write_line(_LINES[k])
