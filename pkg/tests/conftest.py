import numpy as np
import pytest


@pytest.fixture(autouse=True, scope="session")
def _reference_cache(tmp_path_factory):
    """Keep computed population references out of the user cache."""
    mp = pytest.MonkeyPatch()
    mp.setenv("DEPTHTRIM_CACHE", str(tmp_path_factory.mktemp("refcache")))
    yield
    mp.undo()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def square():
    return np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


def pytest_terminal_summary(terminalreporter):
    from ._report import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
