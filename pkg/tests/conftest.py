import pytest

_LINES: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record the outcome line of an acceptance criterion, then assert it."""

    def record(number: int, ok: bool, detail: str) -> None:
        _LINES[number] = f"[criterion {number}] {'PASS' if ok else 'FAIL'} {detail}"
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_LINES):
            terminalreporter.write_line(_LINES[k])
