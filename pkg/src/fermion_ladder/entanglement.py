"""Entanglement diagnostics of (reduced) correlation matrices, in nats."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ParameterError

CLIP_TOL = 1e-9
HARD_TOL = 1e-6
COND_MAX = 1e12


def _spectrum(dr: np.ndarray) -> np.ndarray:
    lam = np.linalg.eigvalsh(dr)
    if lam.size and (lam.min() < -HARD_TOL or lam.max() > 1 + HARD_TOL):
        raise NumericError(
            f"correlation spectrum [{lam.min():.3e}, {lam.max():.3e}] leaves [0, 1]"
        )
    return np.clip(lam, 0.0, 1.0)


def _binary_entropy(lam: np.ndarray) -> float:
    lam = lam[(lam > 0.0) & (lam < 1.0)]
    return float(-np.sum(lam * np.log(lam) + (1 - lam) * np.log1p(-lam)))


def von_neumann_entropy(dr: np.ndarray) -> float:
    return _binary_entropy(_spectrum(dr))


def renyi_half_entropy(dr: np.ndarray) -> float:
    lam = _spectrum(dr)
    return float(2.0 * np.sum(np.log(np.sqrt(lam) + np.sqrt(1.0 - lam))))


def segment(start: int, length: int, L: int) -> list[int]:
    """Contiguous arc of ``length`` sites starting at ``start`` on a ring of L."""
    return sorted((start + j) % L for j in range(length))


@dataclass(frozen=True)
class Partition:
    a1: tuple
    a2: tuple = field(default=())
    L: int = 0

    def __post_init__(self):
        a1 = tuple(sorted(int(x) for x in self.a1))
        a2 = tuple(sorted(int(x) for x in self.a2))
        object.__setattr__(self, "a1", a1)
        object.__setattr__(self, "a2", a2)
        if set(a1) & set(a2):
            raise ParameterError(f"segments overlap: {sorted(set(a1) & set(a2))}")
        if any(x < 0 or x >= self.L for x in a1 + a2):
            raise ParameterError(f"sites must lie in 0..{self.L - 1}")

    @classmethod
    def bipartition(cls, L: int, l_a: int, start: int = 0) -> "Partition":
        return cls(segment(start, l_a, L), (), L)

    @classmethod
    def antipodal(cls, L: int, l: int, start: int = 0) -> "Partition":
        """Two arcs of ``l`` sites whose starting points are L/2 apart."""
        return cls(segment(start, l, L), segment(start + L // 2, l, L), L)


def entropy_of_sites(d_sys: np.ndarray, sites) -> float:
    sites = np.asarray(sites, dtype=int)
    return von_neumann_entropy(d_sys[np.ix_(sites, sites)])


def mutual_information(d_sys: np.ndarray, part: Partition) -> float:
    if not part.a1 or not part.a2:
        raise ParameterError("mutual information needs two nonempty segments")
    s1 = entropy_of_sites(d_sys, part.a1)
    s2 = entropy_of_sites(d_sys, part.a2)
    s12 = entropy_of_sites(d_sys, part.a1 + part.a2)
    return s1 + s2 - s12


def fermionic_negativity(d_sys: np.ndarray, a) -> float:
    """Logarithmic fermionic negativity of sites ``a`` against the rest of ``d_sys``.

    ``d_sys`` must be the correlation matrix of the whole inner chain; the
    complement of ``a`` inside it is the other half of the bipartition.
    """
    n = d_sys.shape[0]
    a = sorted(int(x) for x in a)
    if not a or len(a) >= n or len(set(a)) != len(a) or a[0] < 0 or a[-1] >= n:
        raise ParameterError(f"a must be a nonempty proper subset of 0..{n - 1}")
    b = [j for j in range(n) if j not in set(a)]
    na = len(a)

    gamma = 2.0 * d_sys - np.eye(n)
    ia, ib = np.array(a), np.array(b)
    g_aa = gamma[np.ix_(ia, ia)]
    g_ab = gamma[np.ix_(ia, ib)]
    g_ba = gamma[np.ix_(ib, ia)]
    g_bb = gamma[np.ix_(ib, ib)]

    g_plus = np.empty((n, n), dtype=complex)
    g_minus = np.empty((n, n), dtype=complex)
    g_plus[:na, :na] = g_aa
    g_minus[:na, :na] = g_aa
    g_plus[na:, na:] = -g_bb
    g_minus[na:, na:] = -g_bb
    g_plus[:na, na:] = 1j * g_ab
    g_minus[:na, na:] = -1j * g_ab
    g_plus[na:, :na] = 1j * g_ba
    g_minus[na:, :na] = -1j * g_ba

    m = np.eye(n) + g_plus @ g_minus
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > COND_MAX:
        raise NumericError(f"1 + G+G- is ill conditioned (cond = {cond:.3e})")
    g_star = 0.5 * (np.eye(n) - np.linalg.solve(m, g_plus + g_minus))

    mu = np.linalg.eigvals(g_star)
    if np.max(np.abs(mu.imag)) > 1e-8 or mu.real.min() < -1e-8 or mu.real.max() > 1 + 1e-8:
        raise NumericError("eigenvalues of the transformed matrix leave [0, 1]")
    mu = np.clip(mu.real, 0.0, 1.0)
    lam = _spectrum(d_sys)
    return float(
        np.sum(np.log(np.sqrt(mu) + np.sqrt(1.0 - mu)))
        + 0.5 * np.sum(np.log(1.0 - 2.0 * lam + 2.0 * lam**2))
    )
