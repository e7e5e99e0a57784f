"""Dense complex linear algebra and composite-basis bookkeeping.

All operators in the package live on small composite Hilbert spaces built
from spin-1 electron triplets (basis order ``+1, 0, -1``) and spin-1/2
nuclei (basis order ``+1/2, -1/2``).  The canonical subsystem ordering for
the full 36-dimensional space is

    A-electron (x) A-nucleus (x) B-electron (x) B-nucleus

and the 9-dimensional electron-only space is A-electron (x) B-electron.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

# tolerances shared across the package
HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
UNITARITY_TOL = 1e-10
POSITIVITY_TOL = -1e-9

# electron basis order (+1, 0, -1); nuclear basis order (+1/2, -1/2)
ELECTRON_MS = (1, 0, -1)
NUCLEAR_MI = (0.5, -0.5)

# spin-1 operators in the (+1, 0, -1) basis
_s = 1.0 / np.sqrt(2.0)
SX1 = np.array([[0, _s, 0], [_s, 0, _s], [0, _s, 0]], dtype=complex)
SY1 = np.array([[0, -1j * _s, 0], [1j * _s, 0, -1j * _s], [0, 1j * _s, 0]], dtype=complex)
SZ1 = np.diag([1.0, 0.0, -1.0]).astype(complex)

# spin-1/2 operators in the (+1/2, -1/2) basis
IX = 0.5 * np.array([[0, 1], [1, 0]], dtype=complex)
IY = 0.5 * np.array([[0, -1j], [1j, 0]], dtype=complex)
IZ = 0.5 * np.diag([1.0, -1.0]).astype(complex)

SPIN1 = (SX1, SY1, SZ1)
SPIN_HALF = (IX, IY, IZ)


class DimensionError(ValueError):
    """Operand dimensions are incompatible."""


def electron_index(ms: int) -> int:
    """Index of an electron level in the (+1, 0, -1) ordering."""
    return ELECTRON_MS.index(ms)


def pair_index(ms_a: int, ms_b: int) -> int:
    """Index of |ms_a, ms_b> in the 9-dimensional electron-only space."""
    return 3 * electron_index(ms_a) + electron_index(ms_b)


def pair_label(index: int) -> tuple[int, int]:
    """Inverse of :func:`pair_index`."""
    return ELECTRON_MS[index // 3], ELECTRON_MS[index % 3]


def full_index(ms_a: int, mi_a: float, ms_b: int, mi_b: float) -> int:
    """Index of |ms_a, mi_a, ms_b, mi_b> in the 36-dimensional space."""
    ia = electron_index(ms_a)
    ja = NUCLEAR_MI.index(mi_a)
    ib = electron_index(ms_b)
    jb = NUCLEAR_MI.index(mi_b)
    return ((ia * 2 + ja) * 3 + ib) * 2 + jb


def basis_state(dim: int, index: int) -> np.ndarray:
    vec = np.zeros(dim, dtype=complex)
    vec[index] = 1.0
    return vec


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product consistent with the canonical subsystem ordering."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def is_hermitian(m: np.ndarray, tol: float = HERMITICITY_TOL) -> bool:
    return bool(np.max(np.abs(m - m.conj().T)) <= tol)


def is_unitary(u: np.ndarray, tol: float = UNITARITY_TOL) -> bool:
    d = u.shape[0]
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(d))) <= tol)


def check_density_matrix(rho: np.ndarray, tol_herm: float = HERMITICITY_TOL,
                         tol_trace: float = TRACE_TOL,
                         tol_pos: float = POSITIVITY_TOL) -> None:
    """Raise ValueError unless rho is a valid density matrix.

    Eigenvalues slightly below zero (down to ``tol_pos``) are tolerated to
    absorb ensemble-averaging round-off.
    """
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError("density matrix must be square")
    if not np.all(np.isfinite(rho)):
        raise ValueError("density matrix has non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > tol_herm:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol_trace:
        raise ValueError(f"density matrix trace {np.trace(rho).real!r} != 1")
    evals = np.linalg.eigvalsh(rho)
    if evals.min() < tol_pos:
        raise ValueError(f"density matrix not positive semidefinite (min eig {evals.min():g})")


def matrix_exponential(h: np.ndarray, t: float) -> np.ndarray:
    """Propagator U = exp(-i 2 pi h t) for a Hermitian h in linear-frequency units (Hz).

    Uses a Hermitian eigendecomposition, which is exact (to round-off) for
    the small dimensions used here.
    """
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h, tol=1e-9 * max(1.0, np.max(np.abs(h)))):
        raise ValueError("matrix_exponential requires a Hermitian generator")
    evals, vecs = np.linalg.eigh(h)
    phases = np.exp(-2j * np.pi * evals * t)
    return (vecs * phases) @ vecs.conj().T


def matrix_exponential_expm(h: np.ndarray, t: float) -> np.ndarray:
    """Scaling-and-squaring evaluation of the same propagator (test oracle)."""
    return expm(-2j * np.pi * np.asarray(h, dtype=complex) * t)


def partial_trace(rho: np.ndarray, dims: tuple[int, ...], keep: tuple[int, ...]) -> np.ndarray:
    """Trace out all subsystems not listed in ``keep``.

    ``dims`` gives the subsystem dimensions in tensor order; ``keep`` lists
    the (zero-based) subsystem positions to retain, in their original order.
    """
    dims = tuple(dims)
    keep = tuple(keep)
    n = len(dims)
    if int(np.prod(dims)) != rho.shape[0]:
        raise DimensionError("dims do not match matrix size")
    if not keep or any(k < 0 or k >= n for k in keep) or len(set(keep)) != len(keep):
        raise ValueError(f"invalid subsystem selector {keep!r}")
    if list(keep) != sorted(keep):
        raise ValueError("keep must be in ascending subsystem order")
    t = rho.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    for offset, i in enumerate(traced):
        ax = i - offset  # axes shift as we trace
        t = np.trace(t, axis1=ax, axis2=ax + (n - offset))
    d = int(np.prod([dims[i] for i in keep]))
    return t.reshape(d, d)


def partial_trace_pair(rho9: np.ndarray, keep: str) -> np.ndarray:
    """Partial trace on the 9-dim electron pair space; keep is 'A' or 'B'."""
    if keep not in ("A", "B"):
        raise ValueError(f"invalid selector {keep!r}")
    return partial_trace(rho9, (3, 3), (0,) if keep == "A" else (1,))


def state_fidelity(rho: np.ndarray, target: np.ndarray) -> float:
    """F = <target| rho |target> for a pure target state."""
    rho = np.asarray(rho, dtype=complex)
    target = np.asarray(target, dtype=complex).ravel()
    if rho.shape[0] != target.size:
        raise DimensionError("state and target dimensions differ")
    nrm = np.linalg.norm(target)
    if not np.isclose(nrm, 1.0, atol=1e-9):
        target = target / nrm
    f = target.conj() @ rho @ target
    if abs(f.imag) > 1e-12 * max(1.0, abs(f.real)):
        raise ValueError("fidelity has a non-negligible imaginary part")
    return float(f.real)


def projector(vec: np.ndarray) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).ravel()
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())
