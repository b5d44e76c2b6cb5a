import numpy as np
import pytest

from sgfluid.grid import make_grid
from sgfluid.operators import build_noise_model
from sgfluid.stokes import stokes_eigensolve, w_basis


@pytest.fixture(autouse=True, scope="session")
def _isolated_cache(tmp_path_factory):
    mp = pytest.MonkeyPatch()
    mp.setenv("SGF_CACHE_DIR", str(tmp_path_factory.mktemp("sgf_cache")))
    yield
    mp.undo()


@pytest.fixture(scope="session")
def grid33():
    return make_grid(33)


@pytest.fixture(scope="session")
def stokes33(grid33):
    return stokes_eigensolve(grid33, 24)


@pytest.fixture(scope="session")
def wbasis33(stokes33):
    return w_basis(stokes33, 12, 0.1)


@pytest.fixture(scope="session")
def noise33(grid33):
    return build_noise_model("bumps", 3, 0.01, grid33)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one acceptance line; it is printed now and repeated in the terminal summary."""

    def record(criterion, passed, detail):
        line = f"{criterion} {'PASS' if passed else 'FAIL'}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
