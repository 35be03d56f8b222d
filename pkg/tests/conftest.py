import pytest

_VERDICTS: dict = {}


@pytest.fixture(scope="session")
def verdicts():
    """Criterion number -> one-line verdict, echoed in the terminal summary."""
    return _VERDICTS


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_VERDICTS):
        terminalreporter.write_line(_VERDICTS[k])
