import pytest

from accelpd.acceptance import RunCache

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def run_cache():
    """Trajectories shared by the acceptance tests and the long diagnostics tests."""
    return RunCache()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
