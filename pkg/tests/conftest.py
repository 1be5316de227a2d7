import pytest

_LINES: dict[str, str] = {}


@pytest.fixture(scope="session")
def report():
    """Record a one-line verdict for an acceptance criterion; returns ``ok``."""

    def record(number: int, name: str, ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
        _LINES[f"{number:02d}-{name}"] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(_LINES):
            terminalreporter.write_line(_LINES[key])
