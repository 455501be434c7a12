import numpy as np
import pytest
from scipy.stats import unitary_group

from fermion_ladder import ed


def random_slater(rng, n_modes, n_part):
    """Haar-random Slater determinant: (correlation matrix, Fock vector)."""
    u = unitary_group.rvs(n_modes, random_state=rng)
    orb = u[:, :n_part]
    return orb.conj() @ orb.T, ed.slater_state(orb)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = {}


@pytest.fixture
def report():
    """report(n, passed, detail): one summary line per acceptance criterion."""

    def _record(n, passed, detail):
        ACCEPTANCE[n] = (bool(passed), detail)
        print(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
