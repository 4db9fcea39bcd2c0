import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from kgprop.geometry import Lattice, builtin_scenario

#: pass/fail lines collected by the acceptance module, echoed after the run
ACCEPTANCE_LINES = []


def pytest_sessionfinish(session, exitstatus):
    if ACCEPTANCE_LINES:
        tw = getattr(session.config, "get_terminal_writer", lambda: None)()
        out = (tw.line if tw else print)
        out("")
        out("acceptance criteria:")
        for line in ACCEPTANCE_LINES:
            out(line)


@pytest.fixture(scope="session", autouse=True)
def _single_thread_blas():
    # desk-scale matrices: threading costs more than it buys, and a fixed
    # thread count keeps reduction order deterministic
    with threadpool_limits(limits=1, user_api="blas"):
        yield


@pytest.fixture(scope="session")
def lattice64():
    return Lattice(64, 1.0)


@pytest.fixture(scope="session")
def lattice4():
    return Lattice(4, np.pi / 2)


@pytest.fixture(scope="session")
def static_model():
    return builtin_scenario("static", {"m": 1.0})


@pytest.fixture(scope="session")
def frw_model():
    return builtin_scenario("frw", {"a0": 1.0, "a1": 2.0, "rho": 1.0, "m": 1.0})


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
