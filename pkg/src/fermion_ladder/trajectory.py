"""Stroboscopic trajectories, steady-state averaging and parameter scans."""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import entanglement as ent
from . import gaussian_state as gs
from .errors import ParameterError, PurityAbort
from .lattice import LadderParams, propagator

log = logging.getLogger(__name__)

N_BOOT = 10_000
BOOT_SEED = 20240229
WORKERS_ENV = "FERMION_LADDER_WORKERS"


@dataclass(frozen=True)
class RunConfig:
    t_st: int = 100
    m: int = 5
    n_traj: int = 400
    base_seed: int = 0
    init: str = "random"
    purity_check_every: int = 10

    def __post_init__(self):
        for name in ("t_st", "n_traj", "purity_check_every"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be positive")
        if self.m < 1:
            raise ParameterError("m must be positive")
        if self.init not in ("random", "neel"):
            raise ParameterError(f"unknown initial state {self.init!r}")

    @classmethod
    def for_size(cls, L: int, t2: float | None = None, **overrides) -> "RunConfig":
        """Steady-state time and trajectory count prescribed for system size L."""
        t_st = 100 if L <= 64 else 1000
        n_traj = 400 if L <= 64 else 1000
        if t2 is not None and t2 <= 1.5:
            n_traj = 1000
        return cls(**{"t_st": t_st, "n_traj": n_traj, **overrides})

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class Observable:
    """Inner-chain observable: ``entropy`` / ``negativity`` of ``a``, or ``mutual_info`` of (a, b)."""

    kind: str
    a: tuple
    b: tuple = field(default=())
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("entropy", "negativity", "mutual_info", "renyi_half"):
            raise ParameterError(f"unknown observable kind {self.kind!r}")
        object.__setattr__(self, "a", tuple(int(x) for x in self.a))
        object.__setattr__(self, "b", tuple(int(x) for x in self.b))
        if not self.name:
            object.__setattr__(self, "name", f"{self.kind}_{len(self.a)}" + (f"_{len(self.b)}" if self.b else ""))

    def __call__(self, d_sys: np.ndarray) -> float:
        if self.kind == "entropy":
            return ent.entropy_of_sites(d_sys, self.a)
        if self.kind == "renyi_half":
            idx = np.array(self.a)
            return ent.renyi_half_entropy(d_sys[np.ix_(idx, idx)])
        if self.kind == "negativity":
            return ent.fermionic_negativity(d_sys, self.a)
        return ent.mutual_information(d_sys, ent.Partition(self.a, self.b, d_sys.shape[0]))


def entropy_obs(L: int, l_a: int, start: int = 0) -> Observable:
    return Observable("entropy", ent.segment(start, l_a, L), name=f"S_{l_a}")


def negativity_obs(L: int, l_a: int, start: int = 0) -> Observable:
    return Observable("negativity", ent.segment(start, l_a, L), name=f"E_{l_a}")


def mutual_info_obs(L: int, l: int, start: int = 0) -> Observable:
    part = ent.Partition.antipodal(L, l, start)
    return Observable("mutual_info", part.a1, part.a2, name=f"I_{l}")


def trajectory_rng(base_seed: int, traj_index: int) -> np.random.Generator:
    """Independent stream per trajectory: child ``traj_index`` of ``base_seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=base_seed, spawn_key=(traj_index,)))


def initial_state(L: int, cfg: RunConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.init == "neel":
        return gs.init_neel(L)
    return gs.init_random_halffilling(L, rng)


class Trajectory:
    """Mutable single-trajectory state; owned by one worker."""

    def __init__(self, params: LadderParams, cfg: RunConfig, traj_index: int, u: np.ndarray | None = None):
        self.params = params
        self.cfg = cfg
        self.rng = trajectory_rng(cfg.base_seed, traj_index)
        self.d = initial_state(params.L, cfg, self.rng)
        self.n0 = float(np.trace(self.d).real)
        u = propagator(params) if u is None else u
        self._uc = np.ascontiguousarray(u.conj())
        self._ut = np.ascontiguousarray(u.T)
        self.step_count = 0
        self.n_measurements = 0

    def step(self) -> list:
        self.d = self._uc @ self.d @ self._ut
        self.step_count += 1
        self.d, records = gs.measure_outer_chain(self.d, self.params.p, self.rng, self.step_count, inplace=True)
        self.n_measurements += len(records)
        if self.step_count % self.cfg.purity_check_every == 0:
            self.check()
        return records

    def check(self):
        defect = gs.purity_defect(self.d)
        if defect > gs.PURITY_ABORT:
            raise PurityAbort(f"purity defect {defect:.3e} at step {self.step_count}")

    @property
    def d_sys(self) -> np.ndarray:
        return gs.inner_chain(self.d)


def run_trajectory_values(params: LadderParams, cfg: RunConfig, observables: Sequence[Observable],
                          traj_index: int, u: np.ndarray | None = None) -> np.ndarray:
    """Observable values after each of the ``m`` post-steady cycles, shape (m, n_obs)."""
    traj = Trajectory(params, cfg, traj_index, u)
    for _ in range(cfg.t_st):
        traj.step()
    out = np.empty((cfg.m, len(observables)))
    for s in range(cfg.m):
        traj.step()
        d_sys = traj.d_sys
        out[s] = [obs(d_sys) for obs in observables]
    traj.check()
    return out


def run_trajectory(params, cfg, observables, traj_index, u=None) -> np.ndarray:
    """Time-averaged value of each observable over the m post-steady cycles."""
    return run_trajectory_values(params, cfg, observables, traj_index, u).mean(axis=0)


def time_series(params: LadderParams, cfg: RunConfig, observables: Sequence[Observable],
                traj_index: int, n_steps: int) -> np.ndarray:
    """Observables after every cycle 0..n_steps (row 0 is the initial state)."""
    traj = Trajectory(params, cfg, traj_index)
    out = np.empty((n_steps + 1, len(observables)))
    out[0] = [obs(traj.d_sys) for obs in observables]
    for t in range(1, n_steps + 1):
        traj.step()
        out[t] = [obs(traj.d_sys) for obs in observables]
    return out


# --- ensembles -----------------------------------------------------------------

@dataclass(frozen=True)
class TrajectoryStats:
    mean: float
    ci95_low: float
    ci95_high: float
    n: int

    @property
    def width(self) -> float:
        return self.ci95_high - self.ci95_low

    def overlaps(self, other: "TrajectoryStats") -> bool:
        return self.ci95_low <= other.ci95_high and other.ci95_low <= self.ci95_high


def _bootstrap_means(values: np.ndarray, n_boot: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = values.shape[0]
    out = np.empty((n_boot,) + values.shape[1:])
    chunk = max(1, 2_000_000 // max(n, 1))
    for start in range(0, n_boot, chunk):
        stop = min(n_boot, start + chunk)
        idx = rng.integers(0, n, size=(stop - start, n))
        out[start:stop] = values[idx].mean(axis=1)
    return out


def ensemble_average(values, n_boot: int = N_BOOT, seed: int = BOOT_SEED) -> TrajectoryStats:
    """Mean over trajectories with a percentile-bootstrap 95% interval."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size < 2:
        raise ParameterError("need at least two trajectories")
    mean = float(values.mean())
    boot = _bootstrap_means(values, n_boot, seed)
    lo, hi = np.percentile(boot, [2.5, 97.5])
    return TrajectoryStats(mean, min(float(lo), mean), max(float(hi), mean), int(values.size))


def ratio_delta(q_quarter, q_half, n_boot: int = N_BOOT, seed: int = BOOT_SEED):
    """1 - mean(q_quarter)/mean(q_half) with a paired bootstrap interval.

    Returns (delta, lo, hi); all NaN when mean(q_half) < 1e-9.
    """
    q_quarter = np.asarray(q_quarter, dtype=float)
    q_half = np.asarray(q_half, dtype=float)
    den = q_half.mean()
    if den < 1e-9:
        return float("nan"), float("nan"), float("nan")
    delta = 1.0 - q_quarter.mean() / den
    boot = _bootstrap_means(np.column_stack([q_quarter, q_half]), n_boot, seed)
    with np.errstate(divide="ignore", invalid="ignore"):
        bd = 1.0 - boot[:, 0] / boot[:, 1]
    bd = bd[np.isfinite(bd)]
    lo, hi = np.percentile(bd, [2.5, 97.5])
    return float(delta), min(float(lo), delta), max(float(hi), delta)


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return 1


def _run_chunk(params, cfg, observables, indices, u, checkpoint_dir):
    out = []
    for i in indices:
        path = None if checkpoint_dir is None else Path(checkpoint_dir) / f"traj_{i:06d}.npy"
        if path is not None and path.exists():
            out.append(np.load(path))
            continue
        vals = run_trajectory_values(params, cfg, observables, i, u)
        if path is not None:
            tmp = path.with_suffix(".tmp.npy")
            np.save(tmp, vals)
            os.replace(tmp, path)
        out.append(vals)
    return out


def run_ensemble_values(params: LadderParams, cfg: RunConfig, observables: Sequence[Observable],
                        workers: int | None = None, checkpoint_dir=None,
                        indices: Sequence[int] | None = None) -> np.ndarray:
    """Per-step observable values of every trajectory, shape (n_traj, m, n_obs).

    Output depends only on (params, cfg, observables): each trajectory draws
    from its own child stream, whatever the worker count.
    """
    indices = list(range(cfg.n_traj)) if indices is None else list(indices)
    workers = default_workers() if workers is None else workers
    u = propagator(params)
    if checkpoint_dir is not None:
        Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
    if workers <= 1 or len(indices) < 2:
        rows = _run_chunk(params, cfg, observables, indices, u, checkpoint_dir)
    else:
        from joblib import Parallel, delayed

        chunks = [indices[k::workers] for k in range(workers)]
        parts = Parallel(n_jobs=workers)(
            delayed(_run_chunk)(params, cfg, observables, c, u, checkpoint_dir) for c in chunks if c
        )
        by_index = {}
        for c, part in zip([c for c in chunks if c], parts):
            by_index.update(zip(c, part))
        rows = [by_index[i] for i in indices]
    return np.stack(rows)


def run_ensemble(params, cfg, observables, workers=None, checkpoint_dir=None) -> np.ndarray:
    """Time-averaged values per trajectory, shape (n_traj, n_obs)."""
    return run_ensemble_values(params, cfg, observables, workers, checkpoint_dir).mean(axis=1)


def convergence_profile(params: LadderParams, cfg: RunConfig, observable: Observable,
                        checkpoints: Sequence[int], workers: int | None = None,
                        values=None) -> list[TrajectoryStats]:
    checkpoints = list(checkpoints)
    if checkpoints != sorted(checkpoints):
        raise ParameterError("checkpoints must be ascending")
    if values is None:
        values = run_ensemble(params, cfg.with_(n_traj=checkpoints[-1]), [observable], workers)[:, 0]
    values = np.asarray(values, dtype=float)
    return [ensemble_average(values[:n]) for n in checkpoints]


# --- phase diagram --------------------------------------------------------------

def scan_phase_diagram(t12_values, t2_values, template: LadderParams, cfg: RunConfig,
                       quantity: str = "delta_S", workers: int | None = None,
                       checkpoint_dir=None) -> list[dict]:
    """delta = 1 - Q_{L/4} / Q_{L/2} on a (t12, t2) grid, Q = entropy or negativity."""
    t12_values, t2_values = list(t12_values), list(t2_values)
    if not t12_values or not t2_values:
        raise ParameterError("empty scan grid")
    if quantity == "delta_S":
        if template.p != 1.0:
            raise ParameterError("delta_S requires p = 1 (pure inner chain)")
        make = entropy_obs
    elif quantity == "delta_E":
        make = negativity_obs
    else:
        raise ParameterError(f"unknown scan quantity {quantity!r}")
    L = template.L
    observables = [make(L, L // 4), make(L, L // 2)]
    rows = []
    for i, t12 in enumerate(t12_values):
        for j, t2 in enumerate(t2_values):
            params = template.with_(t12=float(t12), t2=float(t2))
            ckpt = None if checkpoint_dir is None else Path(checkpoint_dir) / f"point_{i:03d}_{j:03d}"
            vals = run_ensemble(params, cfg, observables, workers, ckpt)
            q4, q2 = ensemble_average(vals[:, 0]), ensemble_average(vals[:, 1])
            delta, lo, hi = ratio_delta(vals[:, 0], vals[:, 1])
            rows.append({
                "t12": float(t12), "t2": float(t2), "p": params.p, "L": L, "n_traj": cfg.n_traj,
                "q_quarter": q4.mean, "q_quarter_ci_low": q4.ci95_low, "q_quarter_ci_high": q4.ci95_high,
                "q_half": q2.mean, "q_half_ci_low": q2.ci95_low, "q_half_ci_high": q2.ci95_high,
                "delta": delta, "delta_ci_low": lo, "delta_ci_high": hi,
            })
            log.info("scan point t12=%.4f t2=%.4f delta=%.4f", t12, t2, delta)
    return rows
