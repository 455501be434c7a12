"""Non-Markovianity of the reduced inner-chain dynamics.

Two pipelines:

* exact: the trajectory-averaged channel (unitary period followed by the
  averaged measurement round) acting on the full-ladder density matrix, with
  the trace distance between reduced inner-chain states;
* Gaussian: ensembles of monitored trajectories, with the quadratic (L2)
  distance computed from products of Gaussian states.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import ed
from . import gaussian_state as gs
from .errors import CapacityError, NumericError, ParameterError, SelfTestError
from .lattice import LadderParams, inner_modes, propagator
from .trajectory import trajectory_rng

log = logging.getLogger(__name__)

PAIR_MODES = ("orthogonal_pure", "random_pure_product", "random_mixed")


# --- density matrices -------------------------------------------------------------

def check_density(rho: np.ndarray, tol: float = 1e-10) -> None:
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ParameterError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise NumericError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise NumericError(f"density matrix trace {np.trace(rho).real:.12f} != 1")
    if np.linalg.eigvalsh(rho).min() < -1e-9:
        raise NumericError("density matrix is not positive semidefinite")


def trace_distance(r1: np.ndarray, r2: np.ndarray) -> float:
    if r1.shape != r2.shape:
        raise ParameterError(f"dimension mismatch {r1.shape} vs {r2.shape}")
    diff = r1 - r2
    return float(0.5 * np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


class AveragedChannel:
    """Trajectory-averaged map of one period: unitary step, then averaged measurements.

    With ``n_particles`` given, states are matrices on that particle-number
    sector only (the channel never couples sectors); otherwise on the full
    Fock space of the ladder.
    """

    def __init__(self, params: LadderParams, n_particles: int | None = None):
        n_modes = 2 * params.L
        if n_modes > ed.MAX_DENSITY_MODES:
            raise CapacityError(f"density-matrix evolution limited to L <= {ed.MAX_DENSITY_MODES // 2}")
        self.params = params
        self.n_modes = n_modes
        U = ed.fock_propagator(params)
        mask = ed.dephasing_mask(params.L, params.p)
        if n_particles is None:
            self.index = np.arange(2**n_modes)
        else:
            self.index = ed.sector_indices(n_modes, n_particles)
        ix = np.ix_(self.index, self.index)
        self.U = np.ascontiguousarray(U[ix])
        self.Ud = np.ascontiguousarray(self.U.conj().T)
        self.mask = mask[ix]
        self._reorder = _inner_reorder(params.L)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return (self.U @ rho @ self.Ud) * self.mask

    def embed(self, rho: np.ndarray) -> np.ndarray:
        if rho.shape[0] == 2**self.n_modes:
            return rho
        full = np.zeros((2**self.n_modes,) * 2, dtype=complex)
        full[np.ix_(self.index, self.index)] = rho
        return full

    def restrict(self, rho: np.ndarray) -> np.ndarray:
        return rho[np.ix_(self.index, self.index)]

    def reduce_inner(self, rho: np.ndarray) -> np.ndarray:
        """Reduced density matrix of the inner chain (modes in site order)."""
        perm, sign, dk, dr = self._reorder
        full = self.embed(rho)
        r = full[np.ix_(perm, perm)] * np.outer(sign, sign)
        return np.einsum("arbr->ab", r.reshape(dk, dr, dk, dr))


@lru_cache(maxsize=None)
def _inner_reorder(L: int):
    n_modes = 2 * L
    keep = list(inner_modes(L))
    rest = [j for j in range(n_modes) if j not in keep]
    P = ed.reorder_operator(n_modes, keep + rest).tocoo()
    # P[new, old] = sign  ->  (P rho P^T)[i, j] = s_i s_j rho[old_i, old_j]
    perm = np.empty(P.shape[0], dtype=int)
    sign = np.empty(P.shape[0])
    perm[P.row] = P.col
    sign[P.row] = P.data
    return perm, sign, 2**L, 2**L


def averaged_channel_step(rho: np.ndarray, params: LadderParams) -> np.ndarray:
    """One period of the averaged dynamics on a full-ladder density matrix."""
    return _full_channel(params)(rho)


@lru_cache(maxsize=16)
def _full_channel(params: LadderParams) -> AveragedChannel:
    return AveragedChannel(params)


def reduce_inner(rho: np.ndarray, L: int) -> np.ndarray:
    perm, sign, dk, dr = _inner_reorder(L)
    r = rho[np.ix_(perm, perm)] * np.outer(sign, sign)
    return np.einsum("arbr->ab", r.reshape(dk, dr, dk, dr))


# --- initial pairs -------------------------------------------------------------------

def _haar_unitary(rng, n: int) -> np.ndarray:
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _random_configuration(rng, L: int) -> np.ndarray:
    occ = np.zeros(2 * L, dtype=int)
    occ[rng.choice(2 * L, size=L, replace=False)] = 1
    return occ


@dataclass
class InitialPair:
    """Two half-filled initial states; correlation matrices are set for Gaussian pairs."""

    mode: str
    rho1: np.ndarray | None = None
    rho2: np.ndarray | None = None
    d1: np.ndarray | None = None
    d2: np.ndarray | None = None


def sample_initial_pair(rng, L: int, mode: str = "orthogonal_pure", representation: str = "density") -> InitialPair:
    """Random pair of half-filled initial states.

    ``orthogonal_pure``: two distinct random occupation configurations.
    ``random_pure_product``: two independent random Slater determinants
    (Haar-random orbitals).
    ``random_mixed``: two random density matrices on the half-filled sector
    (exact representation only).
    """
    if mode not in PAIR_MODES:
        raise ParameterError(f"unknown pair mode {mode!r}")
    if representation not in ("density", "gaussian"):
        raise ParameterError(f"unknown representation {representation!r}")
    n_modes = 2 * L
    if mode == "random_mixed":
        if representation == "gaussian":
            raise ParameterError("random_mixed pairs exist only as density matrices")
        idx = ed.sector_indices(n_modes, L)
        rhos = []
        for _ in range(2):
            g = rng.normal(size=(idx.size, idx.size)) + 1j * rng.normal(size=(idx.size, idx.size))
            r = np.zeros((2**n_modes,) * 2, dtype=complex)
            r[np.ix_(idx, idx)] = g @ g.conj().T
            rhos.append(r / np.trace(r).real)
        return InitialPair(mode, rhos[0], rhos[1])

    if mode == "orthogonal_pure":
        occ1 = _random_configuration(rng, L)
        occ2 = occ1
        while np.array_equal(occ1, occ2):
            occ2 = _random_configuration(rng, L)
        ds = [gs.init_from_occupations(occ1), gs.init_from_occupations(occ2)]
        orbitals = [np.eye(n_modes)[:, np.nonzero(o)[0]] for o in (occ1, occ2)]
    else:
        orbitals = [_haar_unitary(rng, n_modes)[:, :L] for _ in range(2)]
        # D = conj(Phi) Phi^T for Slater orbitals Phi
        ds = [o.conj() @ o.T for o in orbitals]
    pair = InitialPair(mode, d1=ds[0], d2=ds[1])
    if representation == "density":
        psis = [ed.slater_state(o) for o in orbitals]
        pair.rho1, pair.rho2 = (np.outer(p, p.conj()) for p in psis)
    return pair


# --- BLP measure ----------------------------------------------------------------------

NOISE_FLOOR = 1e-12  # increments below this are roundoff


def _increments(series) -> np.ndarray:
    inc = np.diff(np.asarray(series, dtype=float))
    inc[np.abs(inc) <= NOISE_FLOOR] = 0.0
    return inc


def positive_increment_sum(series) -> float:
    inc = _increments(series)
    return float(inc[inc > 0].sum())


def normalized_ratio(series) -> float:
    inc = _increments(series)
    total = np.abs(inc).sum()
    if total == 0:
        return 0.0
    return float(inc[inc > 0].sum() / total)


@dataclass
class BLPResult:
    N: float
    N_norm: float
    best_pair: int
    best_pair_norm: int
    distances: np.ndarray  # (n_pairs, t_max + 1) reduced-state trace distance
    full_distances: np.ndarray  # same, full ladder
    per_pair: np.ndarray = field(default=None)

    @property
    def sigma(self) -> np.ndarray:
        """Per-step increments of the best pair's distance (discrete time derivative)."""
        return np.diff(self.distances[self.best_pair])


def distance_series(params: LadderParams, pair: InitialPair, t_max: int,
                    channel: AveragedChannel | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Reduced and full-ladder trace distances at t = 0..t_max."""
    if channel is None:
        channel = AveragedChannel(params, n_particles=params.L)
    r1, r2 = channel.restrict(pair.rho1), channel.restrict(pair.rho2)
    red = np.empty(t_max + 1)
    full = np.empty(t_max + 1)
    for t in range(t_max + 1):
        if t:
            r1, r2 = channel(r1), channel(r2)
        red[t] = trace_distance(channel.reduce_inner(r1), channel.reduce_inner(r2))
        full[t] = trace_distance(r1, r2)
    return red, full


def blp_measure(params: LadderParams, n_pairs: int, t_max: int, rng, mode: str = "orthogonal_pure") -> BLPResult:
    """N = max over sampled pairs of the summed positive increments of the reduced distance."""
    if n_pairs < 1:
        raise ParameterError("n_pairs must be >= 1")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    channel = AveragedChannel(params, n_particles=params.L)
    red = np.empty((n_pairs, t_max + 1))
    full = np.empty((n_pairs, t_max + 1))
    for k in range(n_pairs):
        pair = sample_initial_pair(rng, params.L, mode)
        red[k], full[k] = distance_series(params, pair, t_max, channel)
    pos = np.array([positive_increment_sum(s) for s in red])
    ratio = np.array([normalized_ratio(s) for s in red])
    return BLPResult(
        N=float(pos.max()), N_norm=float(ratio.max()),
        best_pair=int(pos.argmax()), best_pair_norm=int(ratio.argmax()),
        distances=red, full_distances=full, per_pair=pos,
    )


def normalized_blp_measure(params, n_pairs, t_max, rng, mode="orthogonal_pure") -> float:
    return blp_measure(params, n_pairs, t_max, rng, mode).N_norm


# --- Gaussian quadratic distance -----------------------------------------------------

def gaussian_product_trace(c1: np.ndarray, c2: np.ndarray) -> float:
    """Tr(rho1 rho2) of two number-conserving Gaussian states from their correlation matrices."""
    c1 = np.asarray(c1)
    c2 = np.asarray(c2)
    if c1.shape != c2.shape:
        raise ParameterError(f"dimension mismatch {c1.shape} vs {c2.shape}")
    n = c1.shape[-1]
    eye = np.eye(n)
    m = c1 @ c2 + (eye - c1) @ (eye - c2)
    return float(np.real(np.linalg.det(m)))


def _product_trace_batch(ca: np.ndarray, cb: np.ndarray) -> np.ndarray:
    """Tr(rho_a rho_b) for all pairs: ca (Na, n, n), cb (Nb, n, n) -> (Na, Nb)."""
    n = ca.shape[-1]
    ga = np.eye(n) - 2.0 * ca
    gb = np.eye(n) - 2.0 * cb
    # C1 C2 + (1-C1)(1-C2) = (1 + G1 G2) / 2
    m = 0.5 * (np.eye(n) + np.einsum("aij,bjk->abik", ga, gb))
    return np.real(np.linalg.det(m))


_SELF_TEST_PASSED = False


def self_test_product_trace(n_cases: int = 10, L: int = 3, seed: int = 12345, tol: float = 1e-8) -> float:
    """Compare the determinant formula with explicit Fock-space traces.

    Reduced inner-chain states of random half-filled ladder Slater
    determinants; raises :class:`SelfTestError` on mismatch.
    """
    if L > 3:
        raise ParameterError("self-test runs at L <= 3")
    rng = np.random.default_rng(seed)
    keep = list(inner_modes(L))
    worst = 0.0
    for _ in range(n_cases):
        rhos, cs = [], []
        for _ in range(2):
            orb = _haar_unitary(rng, 2 * L)[:, :L]
            psi = ed.slater_state(orb)
            r = ed.reduced_density(psi, keep)
            rhos.append(r)
            cs.append((orb.conj() @ orb.T)[np.ix_(keep, keep)])
        explicit = float(np.real(np.trace(rhos[0] @ rhos[1])))
        worst = max(worst, abs(explicit - gaussian_product_trace(cs[0], cs[1])))
    if worst > tol:
        raise SelfTestError(f"Gaussian product-trace formula disagrees with exact traces by {worst:.3e}")
    return worst


def ensure_product_trace_validated() -> None:
    global _SELF_TEST_PASSED
    if not _SELF_TEST_PASSED:
        self_test_product_trace()
        _SELF_TEST_PASSED = True


@dataclass
class GaussianEnsemble:
    """Inner-chain correlation matrices, shape (n_traj, t_max + 1, L, L)."""

    corr: np.ndarray

    @property
    def n_traj(self) -> int:
        return self.corr.shape[0]


def run_gaussian_ensemble(params: LadderParams, d0: np.ndarray, n_traj: int, t_max: int,
                          seed: int, u: np.ndarray | None = None) -> GaussianEnsemble:
    """Monitored trajectories from a fixed initial state; trajectory a uses stream (seed, a)."""
    u = propagator(params) if u is None else u
    uc, ut = np.ascontiguousarray(u.conj()), np.ascontiguousarray(u.T)
    L = params.L
    out = np.empty((n_traj, t_max + 1, L, L), dtype=complex)
    for a in range(n_traj):
        rng = trajectory_rng(seed, a)
        d = np.array(d0, dtype=complex)
        out[a, 0] = gs.inner_chain(d)
        for t in range(1, t_max + 1):
            d = uc @ d @ ut
            d, _ = gs.measure_outer_chain(d, params.p, rng, t, inplace=True)
            out[a, t] = gs.inner_chain(d)
    return GaussianEnsemble(out)


def quadratic_distance_series(ens_a: GaussianEnsemble, ens_b: GaussianEnsemble, params=None) -> np.ndarray:
    """d2(t) = sqrt(T_aa + T_bb - 2 T_ab) for the trajectory-averaged states."""
    ensure_product_trace_validated()
    if ens_a.corr.shape[1:] != ens_b.corr.shape[1:]:
        raise ParameterError("ensembles differ in duration or size")
    n_t = ens_a.corr.shape[1]
    out = np.empty(n_t)
    for t in range(n_t):
        ca, cb = ens_a.corr[:, t], ens_b.corr[:, t]
        t_aa = _product_trace_batch(ca, ca).mean()
        t_bb = _product_trace_batch(cb, cb).mean()
        t_ab = _product_trace_batch(ca, cb).mean()
        rad = t_aa + t_bb - 2.0 * t_ab
        if rad < -1e-10:
            raise NumericError(f"negative quadratic-distance radicand {rad:.3e} at t={t}")
        out[t] = np.sqrt(max(rad, 0.0))
    return out


def n_measure_quadratic(series_collection) -> float:
    series_collection = list(series_collection)
    if not series_collection:
        raise ParameterError("need at least one distance series")
    return max(positive_increment_sum(s) for s in series_collection)


@dataclass
class QuadraticResult:
    N: float
    best_pair: int
    series: np.ndarray  # (n_pairs, t_max + 1)


def quadratic_measure(params: LadderParams, n_pairs: int, n_traj: int, t_max: int, seed: int,
                      mode: str = "orthogonal_pure") -> QuadraticResult:
    """Gaussian-pipeline non-Markovianity: d2 series for sampled pairs and its maximum."""
    ensure_product_trace_validated()
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(2**31,)))
    u = propagator(params)
    series = np.empty((n_pairs, t_max + 1))
    for k in range(n_pairs):
        pair = sample_initial_pair(rng, params.L, mode, representation="gaussian")
        pair_seed = int(np.random.SeedSequence(entropy=seed, spawn_key=(k,)).generate_state(1)[0])
        ens1 = run_gaussian_ensemble(params, pair.d1, n_traj, t_max, pair_seed, u)
        ens2 = run_gaussian_ensemble(params, pair.d2, n_traj, t_max, pair_seed, u)
        series[k] = quadratic_distance_series(ens1, ens2)
    pos = np.array([positive_increment_sum(s) for s in series])
    return QuadraticResult(float(pos.max()), int(pos.argmax()), series)


# --- exhaustive outcome tree (oracle for the averaged channel) -----------------------

def outcome_tree(d0: np.ndarray, params: LadderParams, n_cycles: int, tol: float = 1e-14):
    """All measurement histories of ``n_cycles`` periods with their probabilities.

    Returns a list of (weight, correlation matrix). Each outer site is left
    alone with probability 1 - p, or measured with Born weights.
    """
    u = propagator(params)
    branches = [(1.0, np.array(d0, dtype=complex))]
    L = params.L
    for _ in range(n_cycles):
        branches = [(w, gs.evolve(d, u)) for w, d in branches]
        for l in range(L):
            nxt = []
            for w, d in branches:
                n = d[2 * l + 1, 2 * l + 1].real
                if params.p < 1.0:
                    nxt.append((w * (1.0 - params.p), d))
                if params.p > 0.0:
                    if w * params.p * n > tol:
                        nxt.append((w * params.p * n, gs.project_occupied(d, l)))
                    if w * params.p * (1 - n) > tol:
                        nxt.append((w * params.p * (1 - n), gs.project_empty(d, l)))
            branches = nxt
    return branches
