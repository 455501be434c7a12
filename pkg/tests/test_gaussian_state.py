import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fermion_ladder import ed
from fermion_ladder import gaussian_state as gs
from fermion_ladder.errors import DegenerateOutcomeError, ParameterError
from fermion_ladder.lattice import LadderParams, propagator

from conftest import random_slater


def test_random_halffilling_counts():
    d = gs.init_random_halffilling(2, seed=5)
    assert np.count_nonzero(np.diag(d).real == 1) == 2
    assert np.array_equal(d, gs.init_random_halffilling(2, seed=5))


def test_random_halffilling_is_uniform():
    occ = np.array([np.diag(gs.init_random_halffilling(8, seed=s)).real for s in range(10_000)])
    sigma = np.sqrt(0.25 / 10_000)
    assert np.all(np.abs(occ.mean(axis=0) - 0.5) < 3 * sigma + 1e-3)


def test_neel():
    for L in (2, 4):
        d = gs.init_neel(L)
        assert np.trace(d).real == L
        assert np.array_equal(d @ d, d)
    with pytest.raises(ParameterError):
        gs.init_neel(3)


def test_evolve_identity_and_spectrum(rng):
    d, _ = random_slater(rng, 6, 3)
    assert np.allclose(gs.evolve(d, np.eye(6)), d)
    u = propagator(LadderParams(L=3, t2=1.3, t12=0.4))
    assert np.allclose(np.linalg.eigvalsh(gs.evolve(d, u)), np.linalg.eigvalsh(d), atol=1e-12)
    with pytest.raises(ParameterError):
        gs.evolve(d, np.eye(4))


def test_projection_on_uncorrelated_diagonal():
    d = np.diag([1.0, 0.5, 0.0, 0.5]).astype(complex)
    occ = gs.project_occupied(d, 0)
    assert np.allclose(occ, np.diag([1.0, 1.0, 0.0, 0.5]))
    emp = gs.project_empty(d, 0)
    assert np.allclose(emp, np.diag([1.0, 0.0, 0.0, 0.5]))


def test_degenerate_outcomes():
    d = np.diag([1.0, 0.0, 0.0, 1.0]).astype(complex)
    with pytest.raises(DegenerateOutcomeError):
        gs.project_occupied(d, 0)
    with pytest.raises(DegenerateOutcomeError):
        gs.project_empty(d, 1)


@pytest.mark.parametrize("outcome", [gs.OCCUPIED, gs.EMPTY])
def test_projection_matches_ed(rng, outcome):
    d, psi = random_slater(rng, 4, 2)
    proj = gs.project_occupied if outcome == gs.OCCUPIED else gs.project_empty
    for site in (0, 1):
        ref, _ = ed.project_vector(psi, 2 * site + 1, outcome)
        assert np.max(np.abs(proj(d, site) - ed.correlation_from_vector(ref))) < 1e-10


def test_projection_is_idempotent(rng):
    d, _ = random_slater(rng, 6, 3)
    once = gs.project_occupied(d, 1)
    assert np.max(np.abs(gs.project_occupied(once, 1) - once)) < 1e-12
    once = gs.project_empty(d, 2)
    assert np.max(np.abs(gs.project_empty(once, 2) - once)) < 1e-12


def test_measure_p0_and_p1(rng):
    d, _ = random_slater(rng, 8, 4)
    same, rec = gs.measure_outer_chain(d, 0.0, np.random.default_rng(0))
    assert rec == [] and np.array_equal(same, d)
    out, rec = gs.measure_outer_chain(d, 1.0, np.random.default_rng(0))
    assert [r.site for r in rec] == [0, 1, 2, 3]
    assert np.allclose(np.diag(out)[1::2].real, [r.outcome for r in rec])
    assert np.allclose(gs.apply_outcomes(d, [(r.site, r.outcome) for r in rec]), out, atol=1e-12)


def test_t12_zero_isolates_inner_chain(rng):
    # block-diagonal state: inner chain untouched by outer measurements
    di, _ = random_slater(rng, 3, 1)
    do, _ = random_slater(rng, 3, 2)
    d = np.zeros((6, 6), dtype=complex)
    d[0::2, 0::2] = di
    d[1::2, 1::2] = do
    out, _ = gs.measure_outer_chain(d, 1.0, np.random.default_rng(3))
    assert np.max(np.abs(gs.inner_chain(out) - di)) < 1e-12


def test_reduce():
    d = gs.init_from_occupations([1, 0, 0, 1])
    assert np.array_equal(gs.reduce(d, range(4)), d)
    assert np.array_equal(gs.reduce(d, [0]), [[1]])
    with pytest.raises(ParameterError):
        gs.reduce(d, [])
    with pytest.raises(ParameterError):
        gs.reduce(d, [4])


def test_reduced_inner_chain_is_mixed(rng):
    d, _ = random_slater(rng, 4, 2)
    lam = np.linalg.eigvalsh(gs.inner_chain(d))
    assert np.all((lam > 1e-6) & (lam < 1 - 1e-6))


def test_purity_defect_values():
    assert gs.purity_defect(gs.init_neel(4)) == 0
    assert gs.purity_defect(0.5 * np.eye(2)) == pytest.approx(np.sqrt(2) / 4)


def test_long_run_purity_l64():
    params = LadderParams(L=64, t2=1.5, t12=np.pi / 2, p=1.0)
    u = propagator(params)
    d = gs.init_random_halffilling(64, 7)
    rng = np.random.default_rng(7)
    for _ in range(100):
        d, _ = gs.measure_outer_chain(gs.evolve(d, u), 1.0, rng, inplace=True)
    assert gs.purity_defect(d) <= 1e-8
    assert abs(np.trace(d).real - 64) < 1e-10


def test_snapshot_roundtrip(tmp_path, rng):
    d, _ = random_slater(rng, 6, 3)
    gs.save_snapshot(tmp_path / "s.bin", d, 42)
    assert (tmp_path / "s.bin").stat().st_size == 16 + 36 * 16
    back, step = gs.load_snapshot(tmp_path / "s.bin")
    assert step == 42 and np.array_equal(back, d)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.floats(0, 1), L=st.integers(2, 6))
def test_invariants_under_random_steps(seed, p, L):
    rng = np.random.default_rng(seed)
    params = LadderParams(L=L, t2=float(rng.uniform(0, 5)), t12=float(rng.uniform(0, 2 * np.pi)), p=p)
    u = propagator(params)
    d = gs.init_random_halffilling(L, rng)
    for _ in range(30):
        d, _ = gs.measure_outer_chain(gs.evolve(d, u), p, rng)
    assert abs(np.trace(d).real - L) < 1e-10
    assert gs.purity_defect(d) < 1e-8
    assert gs.hermiticity_defect(d) < 1e-10
