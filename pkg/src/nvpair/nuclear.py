"""Nuclear-spin control under a misaligned field and entanglement storage.

Two ingredients:

* Electron-state-conditioned nuclear dynamics: for ``mS = 0`` the hyperfine
  coupling vanishes and the nucleus precesses about an effective field set by
  an enhanced g-tensor, giving conditional Rabi oscillations without any RF
  drive.  For ``mS = +-1`` the nucleus stays quantized along the defect axis.
* A three-step conditional-pi swap that moves a two-electron Bell state onto
  the two intrinsic nuclear spins (store) and back (retrieve), with an
  exponential electron-T1 decay model for the storage interval.

All matrices act on the 36-dimensional electron+nuclear product space in the
slot order (A electron, A nucleus, B electron, B nucleus); frequencies are in
Hz and unitaries follow ``U = exp(-i 2 pi H t)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import sqrtm
from scipy.optimize import brentq, curve_fit

from .engine import embed_full, transition_rotation
from .linalg import partial_trace, tensor_product
from .system import SpinConstants

T1_ELECTRON_S = 1.12e-3
NUCLEAR_T2STAR_S = 7.25e-3
STORAGE_ANGLE_RAD = np.deg2rad(54.5)
STORAGE_FIELD_GAUSS = 40.0

_DIMS = (3, 2, 3, 2)           # (A electron, A nucleus, B electron, B nucleus)
_EL_KEEP = (0, 2)
_NUC_KEEP = (1, 3)


# --------------------------------------------------------------------------
# Effective g-tensor and conditional nuclear Rabi oscillations
# --------------------------------------------------------------------------

def effective_g(ms: int, constants: SpinConstants = SpinConstants()) -> np.ndarray:
    """3x3 effective nuclear g-tensor for electron spin projection ``ms``.

    The transverse hyperfine components are enhanced by electron state mixing;
    the enhancement changes sign between ``mS = 0`` and ``mS = +-1``.
    """
    if ms not in (-1, 0, 1):
        raise ValueError("ms must be one of -1, 0, +1")
    a_transverse = np.diag([constants.a_n_hz, constants.a_n_hz, 0.0])
    scale = (constants.gamma_e_hz_per_g
             / (constants.gamma_n_hz_per_g * constants.delta_hz))
    return np.eye(3) - scale * (2 - 3 * abs(ms)) * a_transverse


@dataclass(frozen=True)
class NuclearRabiParams:
    """Precession components (Hz) of the mS=0 nuclear Hamiltonian."""

    omega_x_hz: float
    omega_z_hz: float

    @property
    def omega_hz(self) -> float:
        return float(np.hypot(self.omega_x_hz, self.omega_z_hz))

    @property
    def contrast(self) -> float:
        """Peak-to-trough population swing, 1 - (omega_z/Omega)^2."""
        return 1.0 - (self.omega_z_hz / self.omega_hz) ** 2


def nuclear_rabi_params(b_gauss: float, theta_rad: float,
                        constants: SpinConstants = SpinConstants()) -> NuclearRabiParams:
    """Rabi parameters for a field of magnitude ``b_gauss`` at polar angle theta."""
    if b_gauss <= 0:
        raise ValueError("a nonzero field magnitude is required to drive the nucleus")
    gn = constants.gamma_n_hz_per_g
    enhancement = 1.0 - (2.0 * constants.gamma_e_hz_per_g * constants.a_n_hz
                         / (gn * constants.delta_hz))
    omega_x = gn * b_gauss * np.sin(theta_rad) * enhancement
    omega_z = gn * b_gauss * np.cos(theta_rad)
    return NuclearRabiParams(float(omega_x), float(omega_z))


def nuclear_rabi(b_gauss: float, theta_rad: float,
                 constants: SpinConstants = SpinConstants(),
                 t_s: float | np.ndarray = 0.0) -> float | np.ndarray:
    """Population remaining in |mS=0, mI=-1/2> after driving for ``t_s``."""
    p = nuclear_rabi_params(b_gauss, theta_rad, constants)
    half = np.pi * p.omega_hz * np.asarray(t_s, dtype=float)
    frac = (p.omega_z_hz / p.omega_hz) ** 2
    out = np.cos(half) ** 2 + frac * np.sin(half) ** 2
    return float(out) if np.isscalar(t_s) else out


def nuclear_hamiltonian_ms0(b_gauss: float, theta_rad: float,
                            constants: SpinConstants = SpinConstants()) -> np.ndarray:
    """2x2 nuclear Hamiltonian (Hz) in the mS=0 manifold, basis (+1/2, -1/2)."""
    p = nuclear_rabi_params(b_gauss, theta_rad, constants)
    return 0.5 * np.array([[p.omega_z_hz, p.omega_x_hz],
                           [p.omega_x_hz, -p.omega_z_hz]], dtype=complex)


def nuclear_rabi_exact(b_gauss: float, theta_rad: float,
                       constants: SpinConstants = SpinConstants(),
                       t_s: float = 0.0) -> float:
    """Same population as :func:`nuclear_rabi`, via the exact 2x2 propagator."""
    h = nuclear_hamiltonian_ms0(b_gauss, theta_rad, constants)
    vals, vecs = np.linalg.eigh(h)
    u = vecs @ np.diag(np.exp(-2j * np.pi * vals * t_s)) @ vecs.conj().T
    return float(abs(u[1, 1]) ** 2)


# --------------------------------------------------------------------------
# Conditional-pulse swap between electron and nuclear Bell states
# --------------------------------------------------------------------------

def _projector_2(index: int) -> np.ndarray:
    p = np.zeros((2, 2), dtype=complex)
    p[index, index] = 1.0
    return p


_PROJ_MS0 = np.diag([0.0, 1.0, 0.0]).astype(complex)


def conditional_electron_pis(defect: str, phase_plus_rad: float = np.pi / 2,
                             phase_minus_rad: float = np.pi / 2) -> np.ndarray:
    """Hyperfine-selective electron flips on one defect (36-dim unitary).

    Applies a pi pulse on 0<->+ when the defect's nucleus is mI=+1/2 and a
    pi pulse on 0<->- when it is mI=-1/2, about the given phase axes.
    """
    u_up = transition_rotation(np.pi, "0+", phase_plus_rad)
    u_dn = transition_rotation(np.pi, "0-", phase_minus_rad)
    slot = defect + "el"
    cond_slot = defect + "nuc"
    step = embed_full(u_up, slot, (cond_slot, _projector_2(0)))
    return embed_full(u_dn, slot, (cond_slot, _projector_2(1))) @ step


def conditional_nuclear_pi(defect: str, contrast: float = 1.0) -> np.ndarray:
    """Nuclear flip on one defect, conditional on its electron being mS=0.

    ``contrast`` < 1 models the physical imperfection of the drive: a residual
    longitudinal component tilts the rotation axis out of the transverse
    plane, capping the pi-pulse transfer probability at ``contrast``.
    """
    if not 0.0 < contrast <= 1.0:
        raise ValueError("contrast must lie in (0, 1]")
    nx = np.sqrt(contrast)
    nz = np.sqrt(1.0 - contrast)
    # pi rotation about the tilted axis nx*y + nz*z (y matches the electron
    # transition phase convention): U = -i (nx sigma_y + nz sigma_z).
    u2 = -1j * np.array([[nz, -1j * nx], [1j * nx, -nz]], dtype=complex)
    return embed_full(u2, defect + "nuc", (defect + "el", _PROJ_MS0))


def swap_unitary(contrast: float = 1.0) -> np.ndarray:
    """Full store unitary: conditional electron pis, nuclear pis, electron pis.

    The closing 0<->- pulses are driven about the -y axis; with that phase
    choice every thermal nuclear branch deposits the same nuclear Bell state,
    so the electron wave function separates from the stored coherence.
    """
    step_in = conditional_electron_pis("B") @ conditional_electron_pis("A")
    step_nuc = (conditional_nuclear_pi("B", contrast)
                @ conditional_nuclear_pi("A", contrast))
    step_out = (conditional_electron_pis("B", phase_minus_rad=-np.pi / 2)
                @ conditional_electron_pis("A", phase_minus_rad=-np.pi / 2))
    return step_out @ step_nuc @ step_in


def thermal_nuclear_state(rho_electron: np.ndarray) -> np.ndarray:
    """Extend a 9-dim electron state with unpolarized nuclei (36-dim)."""
    rho = np.asarray(rho_electron, dtype=complex)
    if rho.shape != (9, 9):
        raise ValueError("expected a 9x9 electron-pair density matrix")
    r4 = rho.reshape(3, 3, 3, 3)  # (iA, iB, iA', iB')
    eye2 = np.eye(2) / 2.0
    out = np.einsum("acbd,eg,fh->aecfbgdh", r4, eye2, eye2)
    return np.ascontiguousarray(out.reshape(36, 36))


def electron_state(rho_36: np.ndarray) -> np.ndarray:
    """Reduced 9-dim electron-pair state of a 36-dim density matrix."""
    return partial_trace(np.asarray(rho_36, dtype=complex), _DIMS, _EL_KEEP)


def nuclear_state(rho_36: np.ndarray) -> np.ndarray:
    """Reduced 4-dim two-nucleus state of a 36-dim density matrix."""
    return partial_trace(np.asarray(rho_36, dtype=complex), _DIMS, _NUC_KEEP)


def _interleaved_product(rho_el: np.ndarray, rho_nuc: np.ndarray) -> np.ndarray:
    """Assemble rho_el (9) x rho_nuc (4) back into slot order (3,2,3,2)."""
    full = tensor_product(rho_el, rho_nuc)  # order (Ael, Bel, Anuc, Bnuc)
    t = full.reshape(3, 3, 2, 2, 3, 3, 2, 2)
    t = t.transpose(0, 2, 1, 3, 4, 6, 5, 7)
    return np.ascontiguousarray(t.reshape(36, 36))


def product_residual(rho_36: np.ndarray) -> float:
    """Largest deviation of the state from (electron) x (nuclear) form."""
    rho = np.asarray(rho_36, dtype=complex)
    approx = _interleaved_product(electron_state(rho), nuclear_state(rho))
    return float(np.max(np.abs(rho - approx)))


def _entropy_bits(rho: np.ndarray) -> float:
    vals = np.linalg.eigvalsh(rho)
    vals = vals[vals > 1e-15]
    return float(-np.sum(vals * np.log2(vals)))


def nuclear_mutual_information(rho_36: np.ndarray) -> float:
    """Mutual information (bits) between the two nuclear spins."""
    rho = np.asarray(rho_36, dtype=complex)
    joint = nuclear_state(rho)
    a = partial_trace(rho, _DIMS, (1,))
    b = partial_trace(rho, _DIMS, (3,))
    return _entropy_bits(a) + _entropy_bits(b) - _entropy_bits(joint)


def _mixed_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    root = sqrtm(rho)
    inner = sqrtm(root @ sigma @ root)
    return float(np.real(np.trace(inner)) ** 2)


@dataclass(frozen=True)
class StorageResult:
    """State and bookkeeping after storing electron entanglement in the nuclei."""

    rho: np.ndarray
    efficiency: float
    storage_time_s: float = 0.0
    contrast: float = 1.0
    pre_storage_electron: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.rho.shape != (36, 36):
            raise ValueError("stored state must live in the 36-dim space")
        if not 0.0 <= self.efficiency <= 1.0 + 1e-12:
            raise ValueError("efficiency must lie in [0, 1]")


def swap_store(rho_36: np.ndarray, contrast: float = 1.0) -> StorageResult:
    """Run the three-step conditional-pi store sequence on a 36-dim state.

    The recorded efficiency is the fidelity of the electron state after an
    immediate retrieve to the electron state before storage.
    """
    rho = np.asarray(rho_36, dtype=complex)
    if rho.shape != (36, 36):
        raise ValueError("swap_store needs the 36-dim electron+nuclear state")
    u = swap_unitary(contrast)
    stored = u @ rho @ u.conj().T
    before = electron_state(rho)
    retrieved = electron_state(u @ stored @ u.conj().T)
    eff = min(1.0, _mixed_fidelity(before, retrieved))
    return StorageResult(stored, eff, contrast=contrast,
                         pre_storage_electron=before)


def swap_retrieve(stored: StorageResult) -> np.ndarray:
    """Rerun the swap sequence, moving the coherence back to the electrons.

    With ideal pulses the sequence is its own inverse on the stored subspace;
    reduced nuclear-pi contrast costs the same factor again on the way out.
    """
    if not isinstance(stored, StorageResult):
        raise TypeError("retrieve requires a StorageResult produced by swap_store")
    u = swap_unitary(stored.contrast)
    return u @ stored.rho @ u.conj().T


def round_trip_efficiency(rho_36: np.ndarray, contrast: float = 1.0) -> float:
    """Electron-state fidelity after store followed by retrieve."""
    stored = swap_store(rho_36, contrast)
    back = electron_state(swap_retrieve(stored))
    return min(1.0, _mixed_fidelity(stored.pre_storage_electron, back))


def fit_contrast(target_efficiency: float, rho_36: np.ndarray) -> float:
    """Nuclear-pi contrast whose round trip reaches ``target_efficiency``.

    Searches the physical branch c in (1/2, 1], where the round-trip
    efficiency rises monotonically from 1/4 (fully tilted axis) to 1.
    """
    if not 0.25 < target_efficiency <= 1.0:
        raise ValueError("target efficiency must lie in (0.25, 1]")

    def gap(c):
        return round_trip_efficiency(rho_36, c) - target_efficiency

    return float(brentq(gap, 0.5, 1.0, xtol=1e-10))


# --------------------------------------------------------------------------
# Storage-interval decay
# --------------------------------------------------------------------------

def storage_decay(stored: StorageResult | float, t_s: float | np.ndarray,
                  t1_s: float = T1_ELECTRON_S,
                  nuclear_t2star_s: float = NUCLEAR_T2STAR_S) -> float | np.ndarray:
    """Retrieval efficiency after waiting ``t_s`` in the stored configuration.

    Electron T1 flips scramble the conditional pulses (exponential factor);
    nuclear dephasing adds a Gaussian envelope with the nuclear T2* reference.
    """
    eff0 = stored.efficiency if isinstance(stored, StorageResult) else float(stored)
    t = np.asarray(t_s, dtype=float)
    if np.any(t < 0):
        raise ValueError("storage time must be >= 0")
    decay = np.exp(-t / t1_s) if np.isfinite(t1_s) else np.ones_like(t)
    decay = decay * np.exp(-(t / nuclear_t2star_s) ** 2)
    out = eff0 * decay
    return float(out) if np.isscalar(t_s) else out


def simulate_storage_decay(eff0: float, t_s: np.ndarray,
                           t1_s: float = T1_ELECTRON_S,
                           nuclear_t2star_s: float = NUCLEAR_T2STAR_S,
                           n_traj: int = 20000, seed: int = 0) -> np.ndarray:
    """Jump-process cross-check: sample electron flip times at rate 1/T1.

    A trajectory whose first flip lands inside the storage interval loses its
    stored coherence entirely; survivors keep the Gaussian nuclear envelope.
    """
    t = np.asarray(t_s, dtype=float)
    rng = np.random.default_rng(seed)
    flips = rng.exponential(scale=t1_s, size=n_traj)
    survival = np.mean(flips[None, :] > t[:, None], axis=1)
    return eff0 * survival * np.exp(-(t / nuclear_t2star_s) ** 2)


def fit_storage_t1(t_s: np.ndarray, efficiency: np.ndarray,
                   nuclear_t2star_s: float = NUCLEAR_T2STAR_S) -> tuple[float, float]:
    """Fit (T1, efficiency(0)) to a measured storage-decay curve."""
    t = np.asarray(t_s, dtype=float)
    y = np.asarray(efficiency, dtype=float)

    def model(tt, t1, eff0):
        return eff0 * np.exp(-tt / t1) * np.exp(-(tt / nuclear_t2star_s) ** 2)

    p0 = (max(t[-1], 1e-6) / 2.0, max(y[0], 1e-3))
    popt, _ = curve_fit(model, t, y, p0=p0, maxfev=10000)
    return float(popt[0]), float(popt[1])
