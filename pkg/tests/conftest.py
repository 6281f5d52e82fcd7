import pytest

_RESULTS = {}


class AcceptanceLog:
    def record(self, criterion: int, title: str, ok: bool, detail: str) -> None:
        _RESULTS[criterion] = (title, ok, detail)
        print(f"criterion {criterion} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")


@pytest.fixture(scope="session")
def acceptance_log():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        title, ok, detail = _RESULTS[n]
        terminalreporter.write_line(f"criterion {n} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")
