import pytest

_RESULTS = {}
N_CRITERIA = 9


@pytest.fixture(scope="session")
def acceptance():
    """Recorder for acceptance criteria: ``record(number, title, passed, detail)``."""

    def record(number, title, passed, detail=""):
        _RESULTS[number] = (title, bool(passed), detail)
        print(f"{'PASS' if passed else 'FAIL'} criterion {number}: {title} | {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        if n in _RESULTS:
            title, passed, detail = _RESULTS[n]
            terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {n}: {title} | {detail}")
        else:
            terminalreporter.write_line(f"NOT RUN criterion {n}")
