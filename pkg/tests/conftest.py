import pytest

_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line; shown in the terminal summary and on stdout."""

    def emit(label: str, ok: bool | None, detail: str) -> bool | None:
        # ok=None records an informational NOTE line
        status = "NOTE" if ok is None else ("PASS" if ok else "FAIL")
        line = f"{status} {label}: {detail}"
        _LINES.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
