"""Two-leg ring ladder: single-particle Hamiltonian and one-period propagator.

Mode layout (used by every module in the package)::

    mode(i, sigma) = 2 * i + (sigma - 1),   i = 0..L-1, sigma in {1, 2}

i.e. row-major over (site, chain) with the chain index running fastest.
Chain 1 is the inner chain (the system), chain 2 the outer chain (the bath,
which is the one being measured).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericError, ParameterError

INNER = 1
OUTER = 2


def mode(i: int, sigma: int) -> int:
    return 2 * i + (sigma - 1)


def inner_modes(L: int) -> np.ndarray:
    return np.arange(0, 2 * L, 2)


def outer_modes(L: int) -> np.ndarray:
    return np.arange(1, 2 * L, 2)


def momenta(L: int) -> np.ndarray:
    """Allowed momenta k = 2*pi*m/L, m = 0..L-1."""
    return 2.0 * np.pi * np.arange(L) / L


@dataclass(frozen=True)
class LadderParams:
    L: int
    t2: float
    t12: float
    t1: float = 1.0
    tau_u: float = 1.0
    p: float = 1.0

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 2:
            raise ParameterError(f"L must be an integer >= 2, got {self.L!r}")
        if not self.tau_u > 0:
            raise ParameterError(f"tau_u must be positive, got {self.tau_u!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ParameterError(f"p must lie in [0, 1], got {self.p!r}")
        object.__setattr__(self, "L", int(self.L))

    @property
    def t(self) -> float:
        return self.t1 + self.t2

    @property
    def delta(self) -> float:
        return self.t1 - self.t2

    def with_(self, **changes) -> "LadderParams":
        return replace(self, **changes)


def build_single_particle_hamiltonian(params: LadderParams) -> np.ndarray:
    """Hopping matrix ``h`` with ``H = sum_ab c_a^dag h_ab c_b``.

    Bonds wrap around the ring, so for ``L = 2`` the hop and the wrap land on
    the same matrix element and add up.
    """
    L = params.L
    if L < 2:
        raise ParameterError("periodic ladder needs L >= 2")
    h = np.zeros((2 * L, 2 * L), dtype=complex)
    for sigma, t_sigma in ((INNER, params.t1), (OUTER, params.t2)):
        for i in range(L):
            a, b = mode(i, sigma), mode((i + 1) % L, sigma)
            h[a, b] += t_sigma
            h[b, a] += t_sigma
    for i in range(L):
        a, b = mode(i, INNER), mode(i, OUTER)
        h[a, b] += params.t12
        h[b, a] += params.t12
    return h


def momentum_block(params: LadderParams, k: float) -> np.ndarray:
    """2x2 Bloch Hamiltonian in the chain basis (inner, outer)."""
    ck = np.cos(k)
    return np.array(
        [[2 * params.t1 * ck, params.t12], [params.t12, 2 * params.t2 * ck]],
        dtype=complex,
    )


def build_propagator(h: np.ndarray, tau: float, *, tol: float = 1e-12) -> np.ndarray:
    """exp(-i tau h) through the Hermitian eigendecomposition of ``h``."""
    h = np.asarray(h)
    herm_err = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if herm_err > tol:
        raise NumericError(f"hamiltonian is not Hermitian (max deviation {herm_err:.3e})")
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * tau * w)) @ v.conj().T


def propagator(params: LadderParams) -> np.ndarray:
    return build_propagator(build_single_particle_hamiltonian(params), params.tau_u)


def analytic_uk(params: LadderParams, k: float, tau: float | None = None) -> np.ndarray:
    """Closed-form exp(-i tau H_k) for one momentum sector."""
    if tau is None:
        tau = params.tau_u
    ck = np.cos(k)
    delta = params.delta
    omega = np.sqrt(params.t12**2 + (delta * ck) ** 2)
    # sin(omega tau) / omega -> tau as omega -> 0
    sinc = np.sin(omega * tau) / omega if omega > 0 else tau
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    inner = np.cos(omega * tau) * np.eye(2) - 1j * (params.t12 * sx + delta * ck * sz) * sinc
    return np.exp(-1j * params.t * ck * tau) * inner


def fourier_blocks(u: np.ndarray, L: int) -> np.ndarray:
    """Diagonal 2x2 momentum blocks of a single-particle operator, shape (L, 2, 2).

    Off-diagonal (k != k') weight is dropped; for a translation-invariant
    operator it vanishes.
    """
    uk = to_momentum_basis(u, L).reshape(L, 2, L, 2)
    m = np.arange(L)
    return uk[m, :, m, :]


def to_momentum_basis(u: np.ndarray, L: int) -> np.ndarray:
    """Full (2L x 2L) representation in the (k, chain) basis, k-major."""
    j = np.arange(L)
    f = np.exp(1j * np.outer(j, momenta(L))) / np.sqrt(L)
    big = np.kron(f, np.eye(2))
    return big.conj().T @ u @ big
