import numpy as np
import pytest

from hylo import acceptance
from hylo.functionals import FunctionalContext
from hylo.grid import RadialGrid
from hylo.potential import builtin


@pytest.fixture(scope="session")
def wref():
    return builtin("wref")


@pytest.fixture(scope="session")
def ref_ctx():
    return acceptance.reference_context()


@pytest.fixture(scope="session")
def ref_sigma():
    return acceptance.reference_sigma()


@pytest.fixture(scope="session")
def ref_solution():
    return acceptance.reference_solution()


@pytest.fixture(scope="session")
def vortex():
    return acceptance.vortex_solution()


@pytest.fixture(scope="session")
def small_ctx(wref):
    """Coarse grid for tests that only need the algebra, not accuracy."""
    return FunctionalContext(RadialGrid(3, 20.0, 400), wref)


def smooth_field(grid, rng, positive=True):
    """Random smooth compactly decaying profile (few Gaussian bumps)."""
    r = grid.r
    u = np.zeros_like(r)
    for _ in range(3):
        c = rng.uniform(0.0, 0.5 * grid.r_max)
        w = rng.uniform(1.0, 4.0)
        a = rng.uniform(0.2, 1.5) if positive else rng.uniform(-1.5, 1.5)
        u += a * np.exp(-((r - c) / w) ** 2)
    if grid.ell != 0:
        u *= r / (1.0 + r)
    return u * np.clip((grid.r_max - r) / 2.0, 0.0, 1.0)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
