import pytest

_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record and print one acceptance line, then assert on it."""

    def report(number: int, ok: bool, detail: str, skipped: bool = False) -> None:
        status = "SKIP" if skipped else ("PASS" if ok else "FAIL")
        line = f"[acceptance {number:2d}] {status}  {detail}"
        _CRITERIA[number] = line
        print(line)
        if skipped:
            pytest.skip(detail)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[number])
