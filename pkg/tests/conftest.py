import numpy as np
import pytest

from firkprec.discretize import Grid3D, PdeCoeffs, assemble_fdm, mass_fdm


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_mk():
    """Mass and stiffness matrices on a 4^3 interior grid."""
    grid = Grid3D(4)
    return mass_fdm(grid), assemble_fdm(grid, PdeCoeffs(), p=2)


def random_quasi_stable(rng, n):
    return rng.standard_normal((n, n))


@pytest.fixture
def acceptance_log(request):
    """Record ``(criterion, passed, detail)`` for the end-of-run summary."""
    store = request.config.__dict__.setdefault("_acceptance_results", {})

    def record(number, passed, detail):
        store[number] = (bool(passed), detail)
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.__dict__.get("_acceptance_results")
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        passed, detail = store[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
