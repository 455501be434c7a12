"""Acceptance suite: one test per criterion, each recording a pass/fail line."""
import math

import numpy as np
import pytest
from scipy.stats import unitary_group

from fermion_ladder import cli, ed, fitting, io
from fermion_ladder import entanglement as ent
from fermion_ladder import gaussian_state as gs
from fermion_ladder import nonmarkov as nm
from fermion_ladder import trajectory as tr
from fermion_ladder.lattice import LadderParams, propagator

from conftest import random_slater

PI = math.pi


# 1 -------------------------------------------------------------------------------

def test_01_ed_convention_oracle(report):
    params = LadderParams(L=2, t2=1.7, t12=0.9, p=1.0)
    u = propagator(params)
    rng = np.random.default_rng(101)
    worst = 0.0
    for trial in range(4):
        if trial % 2:
            d, psi = random_slater(rng, 4, 2)
        else:
            occ = np.zeros(4, dtype=int)
            occ[rng.choice(4, 2, replace=False)] = 1
            d, psi = gs.init_from_occupations(occ), ed.fock_state(occ)
        # script drawn once from the ED Born weights, then replayed on both sides
        script, phi = [], psi
        U = ed.fock_propagator(params)
        for _ in range(5):
            phi = U @ phi
            cycle = []
            for site in range(2):
                p1 = float(np.sum(np.abs(phi[ed.occupations(4)[:, 2 * site + 1] == 1]) ** 2))
                outcome = int(rng.random() < p1) if 1e-6 < p1 < 1 - 1e-6 else int(p1 > 0.5)
                phi, _ = ed.project_vector(phi, 2 * site + 1, outcome)
                cycle.append((site, outcome))
            script.append(cycle)
        ref = ed.ed_reference_evolution(psi, params, script)
        for t, cycle in enumerate(script, start=1):
            d = gs.apply_outcomes(gs.evolve(d, u), cycle)
            worst = max(worst, np.max(np.abs(d - ref["correlations"][t])))
    passed = worst <= 1e-10
    report(1, passed, f"max |D_gauss - D_ED| over 4 scripts x 5 cycles = {worst:.2e} (tol 1e-10)")
    assert passed


# 2 -------------------------------------------------------------------------------

def test_02_born_frequencies(report):
    params = LadderParams(L=2, t2=2.2, t12=0.7, p=1.0)
    u = propagator(params)
    occ = [1, 0, 0, 1]
    d0 = gs.init_from_occupations(occ)
    # exact joint probabilities of the two outcomes after one period
    phi = ed.fock_propagator(params) @ ed.fock_state(occ)
    probs = {}
    for o0 in (0, 1):
        for o1 in (0, 1):
            mask = (ed.occupations(4)[:, 1] == o0) & (ed.occupations(4)[:, 3] == o1)
            probs[(o0, o1)] = float(np.sum(np.abs(phi[mask]) ** 2))
    n = 100_000
    rng = np.random.default_rng(2024)
    d1 = gs.evolve(d0, u)
    counts = dict.fromkeys(probs, 0)
    for _ in range(n):
        _, rec = gs.measure_outer_chain(d1, 1.0, rng)
        counts[(rec[0].outcome, rec[1].outcome)] += 1
    zs = {k: (counts[k] / n - p) / math.sqrt(max(p * (1 - p), 1e-300) / n) if 0 < p < 1 else
          (0.0 if counts[k] == round(p * n) else math.inf) for k, p in probs.items()}
    worst = max(abs(z) for z in zs.values())
    passed = worst <= 4.0
    report(2, passed, f"max |z| over joint outcomes = {worst:.2f} (bound 4 sigma, N = {n})")
    assert passed


# 3 -------------------------------------------------------------------------------

def test_03_invariant_sweep(report):
    rng = np.random.default_rng(303)
    worst = {"number": 0.0, "purity": 0.0, "herm": 0.0, "neg": 0.0, "mi": 0.0, "sym": 0.0}
    for k in range(20):
        L = int(rng.choice([4, 6, 8, 12, 16, 24, 32]))
        p = 1.0 if k % 4 == 0 else float(rng.uniform(0, 1))
        params = LadderParams(L=L, t2=float(rng.uniform(0, 5)), t12=float(rng.uniform(0, 2 * PI)), p=p)
        u = propagator(params)
        d = gs.init_random_halffilling(L, rng)
        for step in range(1, 201):
            d, _ = gs.measure_outer_chain(gs.evolve(d, u), p, rng)
            if step % 50:
                continue
            worst["number"] = max(worst["number"], abs(np.trace(d).real - L))
            worst["purity"] = max(worst["purity"], gs.purity_defect(d))
            worst["herm"] = max(worst["herm"], gs.hermiticity_defect(d))
            d_sys = gs.inner_chain(d)
            half = list(range(L // 2))
            worst["neg"] = max(worst["neg"], -ent.fermionic_negativity(d_sys, half))
            part = ent.Partition.antipodal(L, max(1, L // 4))
            worst["mi"] = max(worst["mi"], -ent.mutual_information(d_sys, part))
            # global state pure: inner chain against outer chain
            s_in = ent.von_neumann_entropy(d_sys)
            s_out = ent.von_neumann_entropy(d[1::2, 1::2])
            worst["sym"] = max(worst["sym"], abs(s_in - s_out))
            if p == 1.0:
                rest = list(range(L // 2, L))
                worst["sym"] = max(worst["sym"], abs(ent.entropy_of_sites(d_sys, half)
                                                     - ent.entropy_of_sites(d_sys, rest)))
    passed = (worst["number"] <= 1e-10 and worst["purity"] <= 1e-8 and worst["herm"] <= 1e-10
              and worst["neg"] <= 1e-8 and worst["mi"] <= 1e-8 and worst["sym"] <= 1e-8)
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report(3, passed, f"20 points, 200 steps: worst {detail}")
    assert passed


# 4 -------------------------------------------------------------------------------

def test_04_periodicity(report):
    cfg = tr.RunConfig(t_st=100, n_traj=200, base_seed=40)
    obs = [tr.entropy_obs(16, 8)]
    base = LadderParams(L=16, t1=1.0, t2=1.0, t12=0.4, p=1.0)
    a = tr.run_ensemble(base, cfg, obs)[:, 0]
    # independent trajectories for the shifted point
    b = tr.run_ensemble(base.with_(t12=0.4 + PI), cfg.with_(base_seed=41), obs)[:, 0]
    # same streams: the trajectories coincide up to roundoff
    b_same = tr.run_ensemble(base.with_(t12=0.4 + PI), cfg, obs)[:, 0]
    sa, sb = tr.ensemble_average(a), tr.ensemble_average(b)
    same_seed_gap = float(np.max(np.abs(a - b_same)))
    passed = sa.overlaps(sb) and same_seed_gap < 1e-8
    report(4, passed, f"S(0.4) = {sa.mean:.4f} [{sa.ci95_low:.4f}, {sa.ci95_high:.4f}], "
                      f"S(0.4+pi) = {sb.mean:.4f} [{sb.ci95_low:.4f}, {sb.ci95_high:.4f}]; "
                      f"same-seed max gap {same_seed_gap:.1e}")
    assert passed


# 5 -------------------------------------------------------------------------------

@pytest.mark.slow
def test_05_entropy_profile_shapes(report):
    L = 32
    cfg = tr.RunConfig(t_st=100, n_traj=200, base_seed=50)
    ls = list(range(1, L // 2 + 1))
    obs = [tr.entropy_obs(L, l) for l in ls]
    flat = tr.run_ensemble(LadderParams(L=L, t2=1.0, t12=PI / 2, p=1.0), cfg, obs).mean(axis=0)
    dome = tr.run_ensemble(LadderParams(L=L, t2=1.0, t12=PI, p=1.0), cfg, obs).mean(axis=0)
    window = flat[L // 4 - 1:L // 2]
    ratio_flat = float(window.max() / window.min())
    ratio_dome = float(dome[L // 2 - 1] / dome[L // 8 - 1])
    passed = ratio_flat < 1.15 and ratio_dome > 1.5
    report(5, passed, f"t12=pi/2 max/min over [L/4, L/2] = {ratio_flat:.3f} (< 1.15); "
                      f"t12=pi S_L/2 / S_L/8 = {ratio_dome:.3f} (> 1.5)")
    assert passed


# 6 -------------------------------------------------------------------------------

@pytest.mark.slow
def test_06_phase_diagram_lobes(report):
    cfg = tr.RunConfig(t_st=100, n_traj=150, base_seed=60)
    t12s = np.linspace(0, 2 * PI, 9)
    t2s = np.linspace(0, 5, 9)
    rows = tr.scan_phase_diagram(t12s, t2s, LadderParams(L=16, t2=1.0, t12=0.0, p=1.0), cfg)
    delta = np.array([r["delta"] for r in rows]).reshape(9, 9)  # [t12, t2]
    lobes = [2, 6]  # pi/2, 3pi/2
    ridges = [0, 4, 8]  # 0, pi, 2pi
    small = [j for j, t2 in enumerate(t2s) if 0 < t2 <= 1.5]
    ok = True
    parts = []
    for j in small:
        col = delta[:, j]
        argmin_ok = int(np.nanargmin(col)) in lobes
        gap = float(np.nanmin(col[ridges]) - np.nanmax(col[lobes]))
        ok &= argmin_ok and gap > 0.1
        parts.append(f"t2={t2s[j]:.3f}: min at t12={t12s[int(np.nanargmin(col))]:.3f}, "
                     f"ridge-lobe gap {gap:.3f}")
    report(6, ok, "; ".join(parts) + " (minima at pi/2 or 3pi/2, gap > 0.1)")
    assert ok


# 7 -------------------------------------------------------------------------------

def test_07_negativity_oracle(report):
    rng = np.random.default_rng(707)
    worst = 0.0
    for n_modes, n_keep, subsets in ((4, 2, ([0], [1])), (8, 4, ([0], [0, 1], [0, 2], [1, 2, 3]))):
        for _ in range(10):
            orb = unitary_group.rvs(n_modes, random_state=rng)[:, :n_modes // 2]
            psi = ed.slater_state(orb)
            keep = list(range(n_keep))
            rho = ed.reduced_density(psi, keep)
            d_sys = (orb.conj() @ orb.T)[:n_keep, :n_keep]
            for a in subsets:
                worst = max(worst, abs(ent.fermionic_negativity(d_sys, a) - ed.fermionic_negativity_ed(rho, a)))
    # pure-state regression on p = 1 steady states
    params = LadderParams(L=16, t2=3.0, t12=PI / 2, p=1.0)
    traj_gap = 0.0
    for idx in range(10):
        t = tr.Trajectory(params, tr.RunConfig(base_seed=70), idx)
        for _ in range(100):
            t.step()
        d_sys = t.d_sys
        a = list(range(8))
        e = ent.fermionic_negativity(d_sys, a)
        traj_gap = max(traj_gap, abs(e - ent.renyi_half_entropy(d_sys[:8, :8])))
    passed = worst <= 1e-8 and traj_gap <= 1e-6
    report(7, passed, f"Gaussian vs ED twisted transpose max err {worst:.1e} (1e-8); "
                      f"pure-state E - S_1/2 max {traj_gap:.1e} (1e-6)")
    assert passed


# 8 -------------------------------------------------------------------------------

@pytest.mark.slow
def test_08_negativity_nonmonotonic_in_p(report):
    L = 64
    cfg = tr.RunConfig(t_st=100, n_traj=150, base_seed=80)
    obs = [tr.negativity_obs(L, L // 2)]
    base = LadderParams(L=L, t2=5.0, t12=PI / 2)
    lo = tr.ensemble_average(tr.run_ensemble(base.with_(p=0.25), cfg, obs)[:, 0])
    hi = tr.ensemble_average(tr.run_ensemble(base.with_(p=0.75), cfg, obs)[:, 0])
    passed = hi.mean > lo.mean and hi.ci95_low > lo.ci95_high
    report(8, passed, f"E(p=0.75) = {hi.mean:.4f} [{hi.ci95_low:.4f}, {hi.ci95_high:.4f}] vs "
                      f"E(p=0.25) = {lo.mean:.4f} [{lo.ci95_low:.4f}, {lo.ci95_high:.4f}]")
    assert passed


# 9 -------------------------------------------------------------------------------

def test_09_product_trace_oracle(report):
    worst = nm.self_test_product_trace(n_cases=100, L=3, seed=909, tol=1e-8)
    passed = worst <= 1e-8
    report(9, passed, f"det formula vs explicit Tr(rho1 rho2), 100 cases at L=3: max err {worst:.1e}")
    assert passed


# 10 ------------------------------------------------------------------------------

@pytest.mark.slow
def test_10_blp_positivity(report):
    params = LadderParams(L=4, t2=5.0, t12=PI / 2, p=1.0)
    res = nm.blp_measure(params, 100, 100, np.random.default_rng(1010))
    max_inc = float(np.diff(res.distances, axis=1).max())
    passed = res.N > 0 and max_inc > 1e-8
    report(10, passed, f"N = {res.N:.4f}, N_norm = {res.N_norm:.4f}, largest single increase {max_inc:.2e} (> 1e-8)")
    assert passed


# 11 ------------------------------------------------------------------------------

@pytest.mark.slow
def test_11_quadratic_distance(report):
    parts, ok = [], True
    for p in (0.25, 0.75):
        res = nm.quadratic_measure(LadderParams(L=8, t2=1.0, t12=PI / 2, p=p), 50, 50, 100, seed=1111)
        inc = np.diff(res.series, axis=1)
        n_pos = int((inc > nm.NOISE_FLOOR).sum())
        ok &= res.N > 0 and n_pos > 0
        parts.append(f"p={p}: N = {res.N:.4f}, positive increments {n_pos}")
    report(11, ok, "; ".join(parts))
    assert ok


# 12 ------------------------------------------------------------------------------

CROSSOVER_SIZES = (8, 12, 16, 20, 24, 32, 40, 48, 56, 64)
# resolution 0.25 around the crossover region
CROSSOVER_T2 = (1.5, 2.0, 2.5, 2.75, 3.0, 3.25, 3.5, 3.75, 4.0, 4.25, 4.5, 5.0, 6.0, 8.0)
CROSSOVER_RANGES = ((8, 32), (16, 48), (24, 64))


def crossover_data(n_traj=80, seed=120):
    cfg = tr.RunConfig(t_st=100, n_traj=n_traj, base_seed=seed)
    data = {}
    for t2 in CROSSOVER_T2:
        for L in CROSSOVER_SIZES:
            v = tr.run_ensemble(LadderParams(L=L, t2=t2, t12=PI / 2, p=1.0), cfg, [tr.entropy_obs(L, L // 2)])[:, 0]
            data[t2, L] = tr.ensemble_average(v)
    return data


@pytest.mark.slow
def test_12_fit_machinery_and_crossover(report):
    Ls = np.array([8, 16, 32, 64, 128], dtype=float)
    f = fitting.fit_entropy_scaling(Ls, 0.02 * Ls + 0.5 * np.log(Ls) + 1)
    g = fitting.fit_negativity_scaling(Ls, 0.3 * np.log(Ls) + 0.1)
    synth_err = max(abs(f.gamma - 0.02), abs(f.c - 1.5), abs(f.beta - 1), abs(g.c - 0.6), abs(g.gamma))
    eta = np.logspace(-2.5, -0.1, 20)
    d_err = max(abs(fitting.fit_eta_powerlaw(eta, a * eta**dl).delta - dl) / dl
                for a, dl in ((1.0, 1.0), (3.0, 0.5), (0.4, 1.5)))

    data = crossover_data()
    crossings = []
    for lo, hi in CROSSOVER_RANGES:
        fits = []
        for t2 in CROSSOVER_T2:
            stats = [data[t2, L] for L in CROSSOVER_SIZES]
            w = fitting.weights_from_ci([s.ci95_low for s in stats], [s.ci95_high for s in stats])
            fits.append(fitting.fit_entropy_scaling(CROSSOVER_SIZES, [s.mean for s in stats], w, (lo, hi)))
        crossings.append(fitting.crossover_t2(CROSSOVER_T2, fits))
    grows = all(b >= a for a, b in zip(crossings, crossings[1:])) and crossings[-1] > crossings[0]
    passed = synth_err <= 1e-6 and d_err <= 0.02 and grows
    report(12, passed, f"synthetic coeff err {synth_err:.1e}, Delta rel err {d_err:.1e}; "
                       f"t2_lin for L_max {[r[1] for r in CROSSOVER_RANGES]} = {crossings}")
    assert passed


# 13 ------------------------------------------------------------------------------

def test_13_determinism(tmp_path, report):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("L: 8\nt2: 3\nt12: pi/2\np: 0.5\nrun: {n_traj: 8, t_st: 30}\n"
                   "observables: {entropy: [4], negativity: [4], mutual_info: [1]}\n"
                   "scan: {t12: [pi/2, pi], t2: [1, 3], quantity: delta_E}\n"
                   "nonmarkov: {n_pairs: 2, t_max: 10, n_traj: 4}\n")
    small = tmp_path / "small.yaml"
    small.write_text("L: 2\nt2: 5\nt12: pi/2\nnonmarkov: {n_pairs: 3, t_max: 20}\n")
    jobs = [("trajectory", cfg), ("negativity", cfg), ("scan", cfg), ("d2", cfg), ("blp", small)]
    mismatched = []
    for sub, c in jobs:
        outs = []
        for rep in range(2):
            out = tmp_path / f"{sub}_{rep}"
            assert cli.run([sub, "--config", str(c), "--out", str(out), "--seed", "13"]) == 0
            outs.append(out)
        man = io.RunManifest.load(outs[0] / "manifest.json")
        for name in man.outputs:
            if (outs[0] / name).read_bytes() != (outs[1] / name).read_bytes():
                mismatched.append(f"{sub}/{name}")
    outs = []
    for rep in range(2):
        out = tmp_path / f"fig7_{rep}"
        assert cli.run(["reproduce-figure", "--figure", "fig7", "--scale", "0.2", "--seed", "13", "--out", str(out)]) == 0
        outs.append(out)
    if (outs[0] / "fig7.csv").read_bytes() != (outs[1] / "fig7.csv").read_bytes():
        mismatched.append("fig7/fig7.csv")
    passed = not mismatched
    report(13, passed, "repeated CLI runs (trajectory, negativity, scan, d2, blp, fig7) byte-identical"
           if passed else f"differing files: {mismatched}")
    assert passed
