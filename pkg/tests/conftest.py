import pytest

# (criterion number, title, passed, detail) collected by the acceptance suite
ACCEPTANCE_LOG: list[tuple[int, str, bool, str]] = []


@pytest.fixture
def record_criterion():
    def record(number: int, title: str, passed: bool, detail: str) -> None:
        ACCEPTANCE_LOG.append((number, title, bool(passed), detail))
        assert passed, f"criterion {number} ({title}) failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE_LOG):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {number:2d}. {title}: {detail}")
