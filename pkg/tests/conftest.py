import pytest

from .meshes import disk_fm, disk_mesh


@pytest.fixture(scope="session")
def disk05():
    return disk_mesh(0.05)


@pytest.fixture(scope="session")
def fm_disk05():
    return disk_fm(0.05, 0.0)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
