import time

import pytest

from quantlink import DesignConfig
from quantlink.library import build_library


@pytest.fixture(scope="session")
def small_lib():
    """Fast 3x2 grid for unit tests."""
    return build_library(3, [0.01, 0.05], DesignConfig(restarts=4, seed=7))


@pytest.fixture(scope="session")
def default_lib_timed():
    """The full default grid (8 depths x 10 targets) plus its build time."""
    t0 = time.time()
    lib = build_library()
    return lib, time.time() - t0


@pytest.fixture(scope="session")
def default_lib(default_lib_timed):
    return default_lib_timed[0]
