"""Exact Fock-space representation of the ladder, used as a brute-force oracle.

Basis states are occupation strings ``n_0 n_1 ... n_{M-1}`` over the M = 2L
modes of :mod:`fermion_ladder.lattice`, ordered lexicographically, so mode 0
is the most significant bit and the leftmost tensor factor. Fermionic signs
follow Jordan-Wigner strings in that same order:

    c_j |n> = (-1)^{sum_{k<j} n_k} |n - e_j>      (n_j = 1)
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, OracleError, ParameterError
from .lattice import LadderParams, build_single_particle_hamiltonian, outer_modes

MAX_VECTOR_MODES = 10  # L <= 5
MAX_DENSITY_MODES = 8  # L <= 4


def _check_modes(n_modes: int, limit: int = MAX_VECTOR_MODES):
    if n_modes > limit:
        raise CapacityError(f"{n_modes} modes exceeds the exact-diagonalization limit of {limit}")


@lru_cache(maxsize=None)
def occupations(n_modes: int) -> np.ndarray:
    """(2^M, M) array of occupation numbers; row b is basis state b."""
    b = np.arange(2**n_modes)
    shifts = n_modes - 1 - np.arange(n_modes)
    return ((b[:, None] >> shifts[None, :]) & 1).astype(np.int8)


@lru_cache(maxsize=None)
def _annihilators(n_modes: int) -> tuple:
    _check_modes(n_modes)
    occ = occupations(n_modes).astype(np.int64)
    dim = 2**n_modes
    before = np.cumsum(occ, axis=1) - occ  # particles on modes k < j
    ops = []
    for j in range(n_modes):
        src = np.nonzero(occ[:, j])[0]
        dst = src - (1 << (n_modes - 1 - j))
        sign = np.where(before[src, j] % 2 == 0, 1.0, -1.0)
        ops.append(sp.csr_matrix((sign, (dst, src)), shape=(dim, dim)))
    return tuple(ops)


def annihilation(n_modes: int, j: int) -> sp.csr_matrix:
    return _annihilators(n_modes)[j]


def creation(n_modes: int, j: int) -> sp.csr_matrix:
    return _annihilators(n_modes)[j].T.tocsr()


def number_operator(n_modes: int, j: int) -> np.ndarray:
    """Diagonal of n_j."""
    return occupations(n_modes)[:, j].astype(float)


def total_number(n_modes: int) -> np.ndarray:
    return occupations(n_modes).sum(axis=1).astype(float)


def quadratic_operator(h: np.ndarray) -> sp.csr_matrix:
    """Second-quantized ``sum_ab c_a^dag h_ab c_b`` as a sparse matrix."""
    n_modes = h.shape[0]
    _check_modes(n_modes)
    cs = _annihilators(n_modes)
    dim = 2**n_modes
    out = sp.csr_matrix((dim, dim), dtype=complex)
    for a, b in zip(*np.nonzero(h)):
        out = out + h[a, b] * (cs[a].T @ cs[b])
    return out.tocsr()


def build_fock_hamiltonian(params: LadderParams) -> np.ndarray:
    _check_modes(2 * params.L)
    return quadratic_operator(build_single_particle_hamiltonian(params)).toarray()


def fock_propagator(params: LadderParams) -> np.ndarray:
    w, v = np.linalg.eigh(build_fock_hamiltonian(params))
    return (v * np.exp(-1j * params.tau_u * w)) @ v.conj().T


def single_particle_sector(op: np.ndarray, n_modes: int) -> np.ndarray:
    """Restriction of a Fock operator to the one-particle sector, in mode order."""
    idx = np.array([1 << (n_modes - 1 - j) for j in range(n_modes)])
    return op[np.ix_(idx, idx)]


def sector_indices(n_modes: int, n_particles: int) -> np.ndarray:
    return np.nonzero(total_number(n_modes) == n_particles)[0]


# --- states -----------------------------------------------------------------

def vacuum(n_modes: int) -> np.ndarray:
    psi = np.zeros(2**n_modes, dtype=complex)
    psi[0] = 1.0
    return psi


def fock_state(occ) -> np.ndarray:
    occ = np.asarray(occ, dtype=int)
    n_modes = occ.size
    _check_modes(n_modes)
    index = int("".join(str(x) for x in occ), 2)
    psi = np.zeros(2**n_modes, dtype=complex)
    psi[index] = 1.0
    return psi


def slater_state(orbitals: np.ndarray) -> np.ndarray:
    """prod_n (sum_a orbitals[a, n] c_a^dag) |0>.

    Its correlation matrix is ``conj(orbitals) @ orbitals.T`` when the
    columns are orthonormal.
    """
    n_modes, n_part = orbitals.shape
    _check_modes(n_modes)
    cs = _annihilators(n_modes)
    psi = vacuum(n_modes)
    for n in reversed(range(n_part)):
        psi = sum(orbitals[a, n] * (cs[a].T @ psi) for a in range(n_modes))
    nrm = np.linalg.norm(psi)
    if nrm < 1e-12:
        raise OracleError("orbitals are linearly dependent")
    return psi / nrm


def correlation_from_vector(psi: np.ndarray) -> np.ndarray:
    """D_ab = <psi| c_a^dag c_b |psi>."""
    n_modes = int(np.log2(psi.size))
    cs = _annihilators(n_modes)
    v = np.column_stack([c @ psi for c in cs])
    return v.conj().T @ v


def correlation_from_density(rho: np.ndarray) -> np.ndarray:
    """D_ab = Tr(rho c_a^dag c_b) = Tr(c_b rho c_a^dag)."""
    n_modes = int(np.log2(rho.shape[0]))
    cs = _annihilators(n_modes)
    D = np.empty((n_modes, n_modes), dtype=complex)
    for b in range(n_modes):
        x = np.asarray(cs[b] @ rho)
        for a in range(n_modes):
            D[a, b] = cs[a].multiply(x).sum()
    return D


def project_vector(psi: np.ndarray, j: int, outcome: int) -> tuple[np.ndarray, float]:
    """Born projection of n_j onto ``outcome``; returns (normalized state, probability)."""
    n_modes = int(np.log2(psi.size))
    mask = occupations(n_modes)[:, j] == outcome
    out = np.where(mask, psi, 0.0)
    prob = float(np.vdot(out, out).real)
    if prob <= 1e-14:
        raise OracleError(f"outcome {outcome} on mode {j} has zero Born probability")
    return out / np.sqrt(prob), prob


# --- mode reordering and reduced states -------------------------------------

def reorder_operator(n_modes: int, order) -> sp.csr_matrix:
    """Signed permutation taking the basis with mode order 0..M-1 to ``order``.

    ``order[k]`` is the old mode that becomes new mode k. The sign is the
    parity of the reordering of the creation operators of occupied modes.
    """
    order = np.asarray(order)
    if sorted(order.tolist()) != list(range(n_modes)):
        raise ParameterError("order must be a permutation of all modes")
    occ = occupations(n_modes)
    new_occ = occ[:, order]
    shifts = n_modes - 1 - np.arange(n_modes)
    new_index = (new_occ.astype(np.int64) << shifts).sum(axis=1)
    pos = np.empty(n_modes, dtype=int)
    pos[order] = np.arange(n_modes)
    signs = np.empty(occ.shape[0])
    for b in range(occ.shape[0]):
        seq = pos[np.nonzero(occ[b])[0]]
        inv = 0
        for x in range(len(seq)):
            inv += int(np.sum(seq[x + 1:] < seq[x]))
        signs[b] = -1.0 if inv % 2 else 1.0
    dim = 2**n_modes
    return sp.csr_matrix((signs, (new_index, np.arange(dim))), shape=(dim, dim))


def reduced_density(rho_or_psi: np.ndarray, keep) -> np.ndarray:
    """Reduced density matrix on modes ``keep`` (output mode order = ``keep``)."""
    x = np.asarray(rho_or_psi)
    n_modes = int(np.log2(x.shape[0]))
    keep = list(keep)
    rest = [j for j in range(n_modes) if j not in keep]
    P = reorder_operator(n_modes, keep + rest)
    dk, dr = 2 ** len(keep), 2 ** len(rest)
    if x.ndim == 1:
        y = (P @ x).reshape(dk, dr)
        return y @ y.conj().T
    y = np.asarray(P @ np.asarray(P @ x).T).T  # P x P^T
    y = y.reshape(dk, dr, dk, dr)
    return np.einsum("arbr->ab", y)


def twisted_partial_transpose(rho: np.ndarray, n_a: int) -> np.ndarray:
    """Fermionic (twisted) partial transpose on the first ``n_a`` modes.

    |xi_A xi_B><chi_A chi_B| -> (-1)^phi |chi_A xi_B><xi_A chi_B|,
    phi = [(tau_A + tbar_A) mod 2]/2 + (tau_A + tbar_A)(tau_B + tbar_B),
    followed by the (-1)^{F_A} twist.
    """
    n_modes = int(np.log2(rho.shape[0]))
    occ = occupations(n_modes).astype(np.int64)
    tau_a = occ[:, :n_a].sum(axis=1)
    tau_b = occ[:, n_a:].sum(axis=1)
    da, db = 2**n_a, 2 ** (n_modes - n_a)
    ta = tau_a[:, None] + tau_a[None, :]
    tb = tau_b[:, None] + tau_b[None, :]
    phase = (1j) ** (ta % 2) * (-1.0) ** (ta * tb)
    r = (phase * rho).reshape(da, db, da, db)
    # swap the A indices of bra and ket
    rt = r.transpose(2, 1, 0, 3).reshape(da * db, da * db)
    parity_a = (-1.0) ** tau_a
    return rt * parity_a[None, :]


def fermionic_negativity_ed(rho: np.ndarray, a_modes) -> float:
    """log of the trace norm of the twisted partial transpose of ``rho``."""
    n_modes = int(np.log2(rho.shape[0]))
    a_modes = list(a_modes)
    rest = [j for j in range(n_modes) if j not in a_modes]
    P = reorder_operator(n_modes, a_modes + rest).toarray()
    r = P @ rho @ P.T
    s = np.linalg.svd(twisted_partial_transpose(r, len(a_modes)), compute_uv=False)
    return float(np.log(s.sum()))


def renyi_half_ed(rho: np.ndarray) -> float:
    w = np.clip(np.linalg.eigvalsh(rho), 0.0, None)
    return float(2.0 * np.log(np.sqrt(w).sum()))


def von_neumann_ed(rho: np.ndarray) -> float:
    w = np.linalg.eigvalsh(rho)
    w = w[w > 1e-15]
    return float(-(w * np.log(w)).sum())


# --- averaged (trajectory-mean) channel --------------------------------------

def dephasing_mask(L: int, p: float) -> np.ndarray:
    """Elementwise factor of the averaged measurement round on the outer chain."""
    occ = occupations(2 * L)[:, outer_modes(L)].astype(np.int64)
    differ = (occ[:, None, :] != occ[None, :, :]).sum(axis=2)
    return (1.0 - p) ** differ


def ed_reference_evolution(psi0: np.ndarray, params: LadderParams, script) -> dict:
    """Scripted trajectory in Fock space.

    ``script`` is a sequence over cycles; each entry lists ``(site, outcome)``
    pairs (outer-chain site, 1 = occupied, 0 = empty) applied in order after
    the unitary step of that cycle.
    """
    _check_modes(2 * params.L)
    U = fock_propagator(params)
    psi = np.asarray(psi0, dtype=complex)
    states, corrs, probs = [psi], [correlation_from_vector(psi)], []
    for cycle in script:
        psi = U @ psi
        p_cycle = 1.0
        for site, outcome in cycle:
            psi, pr = project_vector(psi, 2 * site + 1, outcome)
            p_cycle *= pr
        states.append(psi)
        corrs.append(correlation_from_vector(psi))
        probs.append(p_cycle)
    return {"states": states, "correlations": corrs, "probabilities": probs}


def gaussian_pure_vector(d: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Fock vector (up to a global phase) of a pure Gaussian state with correlation matrix ``d``."""
    w, v = np.linalg.eigh(0.5 * (d + d.conj().T))
    if np.any((w > tol) & (w < 1 - tol)):
        raise OracleError("correlation matrix is not idempotent")
    # D = sum_n conj(phi_n) phi_n^T  ->  orbitals phi = conj(v) on the unit eigenvalues
    return slater_state(v[:, w > 0.5].conj())
