"""Correlation-matrix representation of the monitored ladder.

``d[a, b] = <c_a^dag c_b>`` over the 2L modes laid out as in
:mod:`fermion_ladder.lattice`. One stroboscopic period maps
``d -> conj(u) d u^T`` (fixed against the Fock-space oracle), followed by a
round of projective occupation measurements on the outer chain.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg.blas import zgerc as _zgerc

from .errors import DegenerateOutcomeError, ParameterError

EPS = 1e-12
PURITY_ABORT = 1e-6

OCCUPIED = 1
EMPTY = 0


@dataclass(frozen=True)
class MeasurementRecord:
    step: int
    site: int
    outcome: int  # OCCUPIED or EMPTY


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def init_random_halffilling(L: int, seed=None) -> np.ndarray:
    """Random Fock configuration with L particles on the 2L modes."""
    if L < 2:
        raise ParameterError("L must be >= 2")
    rng = _rng(seed)
    occ = np.zeros(2 * L)
    occ[rng.choice(2 * L, size=L, replace=False)] = 1.0
    return np.diag(occ).astype(complex)


def init_neel(L: int) -> np.ndarray:
    """Even rungs hold their particle on the inner chain, odd rungs on the outer."""
    if L < 2 or L % 2:
        raise ParameterError(f"Neel pattern needs an even L >= 2, got {L}")
    occ = np.zeros(2 * L)
    for i in range(L):
        occ[2 * i + (i % 2)] = 1.0
    return np.diag(occ).astype(complex)


def init_from_occupations(occ) -> np.ndarray:
    return np.diag(np.asarray(occ, dtype=float)).astype(complex)


def evolve(d: np.ndarray, u: np.ndarray) -> np.ndarray:
    if d.shape != u.shape:
        raise ParameterError(f"shape mismatch: d {d.shape} vs u {u.shape}")
    return u.conj() @ d @ u.T


def _symmetrize(d: np.ndarray) -> np.ndarray:
    d += d.conj().T
    d *= 0.5
    return d


def _project(d: np.ndarray, m: int, outcome: int) -> np.ndarray:
    """Rank-one projection update on mode ``m``, in place.

    Uses the Hermitian form of the update, ``d -/+ w w^dag / weight``, so the
    caller re-symmetrizes once per round rather than per projection.
    """
    n = d[m, m].real
    w = d[:, m].copy()
    if outcome == OCCUPIED:
        alpha, pin = -1.0 / n, 1.0
    else:
        w[m] -= 1.0
        alpha, pin = 1.0 / (1.0 - n), 0.0
    wc = w.conj()
    if d.flags.c_contiguous and d.dtype == np.complex128:
        # d^T is Fortran-ordered: d^T += alpha conj(w) w^T
        _zgerc(alpha, wc, wc, a=d.T, overwrite_a=1)
    else:
        d += alpha * np.outer(w, wc)
    d[m, :] = 0.0
    d[:, m] = 0.0
    d[m, m] = pin
    return d


def project_occupied(d: np.ndarray, l: int) -> np.ndarray:
    """Apply n_{l,2} and renormalize."""
    m = 2 * l + 1
    if d[m, m].real < EPS:
        raise DegenerateOutcomeError(f"occupation {d[m, m].real:.3e} on outer site {l} is below {EPS}")
    return _symmetrize(_project(np.array(d, dtype=complex), m, OCCUPIED))


def project_empty(d: np.ndarray, l: int) -> np.ndarray:
    """Apply 1 - n_{l,2} and renormalize."""
    m = 2 * l + 1
    if 1.0 - d[m, m].real < EPS:
        raise DegenerateOutcomeError(f"occupation {d[m, m].real:.3e} on outer site {l} is within {EPS} of 1")
    return _symmetrize(_project(np.array(d, dtype=complex), m, EMPTY))


def measure_outer_chain(d: np.ndarray, p: float, rng, step: int = 0, *, inplace: bool = False):
    """One measurement round over the outer chain, sites in ascending order.

    Each site consumes one uniform draw deciding whether it is measured and,
    if so, a second one for the outcome; outcomes are sampled sequentially so
    each Born probability is conditioned on the earlier outcomes.
    """
    d = np.array(d, dtype=complex) if not inplace else d
    L = d.shape[0] // 2
    records = []
    for l in range(L):
        if 1.0 - rng.random() > p:
            continue
        q = 1.0 - rng.random()
        m = 2 * l + 1
        n = d[m, m].real
        if n < EPS:
            outcome = EMPTY
        elif n > 1.0 - EPS:
            outcome = OCCUPIED
        else:
            outcome = OCCUPIED if q <= n else EMPTY
        _project(d, m, outcome)
        records.append(MeasurementRecord(step, l, outcome))
    if records:
        _symmetrize(d)
    return d, records


def apply_outcomes(d: np.ndarray, outcomes) -> np.ndarray:
    """Apply scripted ``(site, outcome)`` projections in order."""
    for l, outcome in outcomes:
        d = project_occupied(d, l) if outcome == OCCUPIED else project_empty(d, l)
    return d


def reduce(d: np.ndarray, modes) -> np.ndarray:
    modes = np.asarray(modes, dtype=int).ravel()
    if modes.size == 0:
        raise ParameterError("empty mode set")
    if modes.min() < 0 or modes.max() >= d.shape[0]:
        raise ParameterError(f"mode indices out of range 0..{d.shape[0] - 1}")
    return d[np.ix_(modes, modes)]


def inner_chain(d: np.ndarray) -> np.ndarray:
    return d[0::2, 0::2]


def purity_defect(d: np.ndarray) -> float:
    return float(np.linalg.norm(d @ d - d))


def hermiticity_defect(d: np.ndarray) -> float:
    return float(np.max(np.abs(d - d.conj().T)))


# --- binary snapshots ----------------------------------------------------------

_MAGIC = b"FLCM"
_HEADER = struct.Struct("<4sIQ")  # magic, L, step -> 16 bytes


def save_snapshot(path, d: np.ndarray, step: int) -> None:
    L = d.shape[0] // 2
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, L, step))
        fh.write(np.ascontiguousarray(d, dtype="<c16").tobytes())


def load_snapshot(path) -> tuple[np.ndarray, int]:
    raw = Path(path).read_bytes()
    magic, L, step = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ParameterError(f"{path}: not a correlation-matrix snapshot")
    d = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size)
    if d.size != (2 * L) ** 2:
        raise ParameterError(f"{path}: truncated snapshot")
    return d.reshape(2 * L, 2 * L).copy(), step
