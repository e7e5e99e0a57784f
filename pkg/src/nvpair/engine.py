"""Compilation of pulse sequences to operators, and gate evolution.

The engine works in a multi-rotating frame: microwave pulses are ideal,
instantaneous rotations on resonance with their transition, and free
evolution ("wait") accumulates only the inter-defect dipolar phase,
optional per-defect detuning phases, and random noise phases.

A transition rotation by angle theta about the in-plane axis at phase phi
acts on the two addressed levels (written in ascending basis-index order of
the (+1, 0, -1) electron ordering) as

    [[cos(theta/2),            -i e^{-i phi} sin(theta/2)],
     [-i e^{+i phi} sin(theta/2), cos(theta/2)]]

so phase=y gives the real rotation block [[c, -s], [s, c]].  The composite
"dq" transition is pi(0+) . rot(0-) . pi(0+) at the common phase, which
manipulates the mS = +1 <-> -1 coherence directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .linalg import (basis_state, is_unitary, pair_index, pair_label,
                     state_fidelity, tensor_product, UNITARITY_TOL)
from .noise import EchoSchedule, NoisePreset, envelope_from_schedule, segment_phase_samples
from .sequences import Condition, Delay, PulseOp, PulseSequence, parse_sequence
from .system import SpinSystem

_SLOT_DIMS = {"Ael": 3, "Anuc": 2, "Bel": 3, "Bnuc": 2}
_SLOT_ORDER = ("Ael", "Anuc", "Bel", "Bnuc")


def transition_rotation(angle_rad: float, transition: str, phase_rad: float = 0.0) -> np.ndarray:
    """3x3 rotation unitary on one electron transition (see module docstring)."""
    c = np.cos(angle_rad / 2.0)
    s = np.sin(angle_rad / 2.0)
    if transition == "dq":
        pi_up = transition_rotation(np.pi, "0+", phase_rad)
        return pi_up @ transition_rotation(angle_rad, "0-", phase_rad) @ pi_up
    if transition == "0+":
        i, j = 0, 1
    elif transition == "0-":
        i, j = 1, 2
    else:
        raise ValueError(f"unknown transition {transition!r}")
    u = np.eye(3, dtype=complex)
    u[i, i] = c
    u[j, j] = c
    u[i, j] = -1j * np.exp(-1j * phase_rad) * s
    u[j, i] = -1j * np.exp(+1j * phase_rad) * s
    return u


def embed_full(op: np.ndarray, slot: str,
               condition: tuple[str, np.ndarray] | None = None) -> np.ndarray:
    """Lift a single-subsystem operator into the 36-dim space.

    ``slot`` names the subsystem carrying ``op``; ``condition`` optionally
    gives (slot, projector): the operation applies in the projected branch
    and the identity acts in the complementary branch.
    """
    if slot not in _SLOT_DIMS:
        raise ValueError(f"unknown subsystem slot {slot!r}")
    if op.shape != (_SLOT_DIMS[slot],) * 2:
        raise ValueError("operator dimension does not match its slot")

    def build(factors: dict[str, np.ndarray]) -> np.ndarray:
        out = np.array([[1.0 + 0j]])
        for name in _SLOT_ORDER:
            f = factors.get(name, np.eye(_SLOT_DIMS[name], dtype=complex))
            out = tensor_product(out, f)
        return out

    if condition is None:
        return build({slot: op})
    cond_slot, proj = condition
    if cond_slot == slot:
        raise ValueError("a pulse cannot be conditioned on its own subsystem")
    comp = np.eye(_SLOT_DIMS[cond_slot], dtype=complex) - proj
    return build({slot: op, cond_slot: proj}) + build({cond_slot: comp})


def _condition_projector(cond: Condition) -> tuple[str, np.ndarray]:
    if cond.kind == "mI":
        slot = cond.defect + "nuc"
        idx = 0 if cond.value > 0 else 1
        proj = np.zeros((2, 2), dtype=complex)
    else:
        slot = cond.defect + "el"
        idx = {1.0: 0, 0.0: 1, -1.0: 2}[cond.value]
        proj = np.zeros((3, 3), dtype=complex)
    proj[idx, idx] = 1.0
    return slot, proj


def pulse_unitary(op: PulseOp, dim: int = 9) -> np.ndarray:
    """Unitary realizing one pulse in the 9- or 36-dimensional space."""
    u3 = transition_rotation(op.angle_rad, op.transition, op.phase_rad)
    targets = ["A", "B"] if op.target == "AB" else [op.target]
    if dim == 9:
        if op.condition is not None:
            raise ValueError("conditional pulses need the 36-dimensional space")
        i3 = np.eye(3, dtype=complex)
        out = np.eye(9, dtype=complex)
        for t in targets:
            out = (tensor_product(u3, i3) if t == "A" else tensor_product(i3, u3)) @ out
        return out
    if dim != 36:
        raise ValueError("pulses act on 9- or 36-dimensional spaces")
    cond = _condition_projector(op.condition) if op.condition is not None else None
    out = np.eye(36, dtype=complex)
    for t in targets:
        if cond is not None and cond[0] == t + "el":
            raise ValueError("electron pulse conditioned on its own electron")
        out = embed_full(u3, t + "el", cond) @ out
    return out


@dataclass(frozen=True)
class CompiledSequence:
    """Alternating unitary and free-evolution segments of a parsed sequence."""

    dim: int
    items: tuple  # ("unitary", ndarray) | ("wait", duration_s)
    source: PulseSequence

    @property
    def wait_boundaries_s(self) -> np.ndarray:
        durations = [d for kind, d in self.items if kind == "wait"]
        return np.concatenate([[0.0], np.cumsum(durations)])

    @property
    def n_waits(self) -> int:
        return sum(1 for kind, _ in self.items if kind == "wait")


def _pair_ms(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """(mS_A, mS_B) per basis index for the 9- or 36-dim space."""
    if dim == 9:
        labels = [pair_label(i) for i in range(9)]
    elif dim == 36:
        from .linalg import ELECTRON_MS
        labels = []
        for ma in ELECTRON_MS:
            for _ in range(2):
                for mb in ELECTRON_MS:
                    labels.extend([(ma, mb)] * 2)
    else:
        raise ValueError("free evolution defined on 9- or 36-dim spaces only")
    ms_a = np.array([la[0] for la in labels], dtype=float)
    ms_b = np.array([la[1] for la in labels], dtype=float)
    return ms_a, ms_b


def free_evolution_diag(dim: int, nu_dip_hz: float, duration_s: float,
                        detuning_a_hz: float = 0.0,
                        detuning_b_hz: float = 0.0) -> np.ndarray:
    """Diagonal phases of a wait segment in the rotating frame."""
    ms_a, ms_b = _pair_ms(dim)
    freq = nu_dip_hz * ms_a * ms_b + detuning_a_hz * ms_a + detuning_b_hz * ms_b
    return np.exp(-2j * np.pi * freq * duration_s)


def compile_sequence(sequence: PulseSequence | str, system: SpinSystem,
                     subspace: str = "electron") -> CompiledSequence:
    """Turn a parsed (or textual) sequence into operator segments."""
    if isinstance(sequence, str):
        sequence = parse_sequence(sequence)
    dim = 9 if subspace == "electron" else 36
    if subspace not in ("electron", "full"):
        raise ValueError(f"unknown subspace {subspace!r}")
    items = []
    for item in sequence.items:
        if isinstance(item, Delay):
            items.append(("wait", item.duration_s))
        else:
            u = pulse_unitary(item, dim)
            if not is_unitary(u, UNITARITY_TOL):
                raise ValueError("compiled pulse is not unitary")
            items.append(("unitary", u))
    return CompiledSequence(dim, tuple(items), sequence)


def ideal_unitary(compiled: CompiledSequence, system: SpinSystem,
                  detuning_a_hz: float = 0.0, detuning_b_hz: float = 0.0) -> np.ndarray:
    """Noise-free unitary of the whole sequence."""
    u = np.eye(compiled.dim, dtype=complex)
    nu = system.coupling_hz
    for kind, val in compiled.items:
        if kind == "wait":
            u = free_evolution_diag(compiled.dim, nu, val,
                                    detuning_a_hz, detuning_b_hz)[:, None] * u
        else:
            u = val @ u
    return u


# --- canonical entanglement gate -------------------------------------------

def phi0p_gate_text(tau_s: float) -> str:
    """Echoed entangling sequence producing |Phi0+> = (|00> - i|++>)/sqrt(2).

    Both defects are brought into a +1/-1 superposition, so the dipolar
    phase accrues at the double-quantum rate; the central composite pi
    refocuses quasi-static single-defect noise.
    """
    tau_us = float(tau_s) * 1e6
    return (
        "# entangling gate, all pulses share the y phase\n"
        "pi/2 AB 0+ phase=y\n"
        "pi AB 0- phase=y\n"
        f"wait {tau_us!r}us\n"
        "pi AB dq phase=y\n"
        f"wait {tau_us!r}us\n"
        "pi AB 0- phase=y\n"
        "pi/2 AB 0+ phase=y\n"
    )


def sq_gate_text(tau_s: float) -> str:
    """Single-quantum variant: superpositions stay on 0 <-> +1 (4x slower)."""
    tau_us = float(tau_s) * 1e6
    return (
        "pi/2 AB 0+ phase=y\n"
        f"wait {tau_us!r}us\n"
        "pi AB 0+ phase=y\n"
        f"wait {tau_us!r}us\n"
        "pi/2 AB 0+ phase=y\n"
    )


def bell_phi0p() -> np.ndarray:
    """(|00> - i|++>)/sqrt(2) in the 9-dim electron space."""
    v = (basis_state(9, pair_index(0, 0)) - 1j * basis_state(9, pair_index(1, 1)))
    return v / np.sqrt(2.0)


def bell_phipm() -> np.ndarray:
    """Image of |Phi0+> under pi pulses on both 0<->- transitions."""
    u = pulse_unitary(PulseOp(np.pi, "AB", "0-", np.pi / 2.0), 9)
    return u @ bell_phi0p()


def convert_state(rho: np.ndarray) -> np.ndarray:
    """Map the Phi0+ family onto the +1/-1 (DQ) Bell family by local pi pulses."""
    u = pulse_unitary(PulseOp(np.pi, "AB", "0-", np.pi / 2.0), rho.shape[0])
    return u @ rho @ u.conj().T


def evolve_analytic_phi0p(tau_s: float, nu_dip_hz: float,
                          l_a: float = 1.0, l_b: float = 1.0) -> np.ndarray:
    """Ensemble-averaged 9x9 output state of the entangling gate.

    ``l_a``/``l_b`` are the per-defect double-quantum echo envelopes
    <exp(2i chi)> over the gate (chi the echo-difference noise phase);
    quasi-static noise refocuses exactly and contributes L = 1.
    """
    if not (0.0 <= l_a <= 1.0 and 0.0 <= l_b <= 1.0):
        raise ValueError("envelopes must lie in [0, 1]")
    if tau_s < 0:
        raise ValueError("evolution time must be >= 0")
    phi_j = 2.0 * np.pi * nu_dip_hz * tau_s
    c4, s4 = np.cos(4.0 * phi_j), np.sin(4.0 * phi_j)
    pi_ab = l_a * l_b
    sig = l_a + l_b
    dlt = l_a - l_b
    pp = pair_index(1, 1)
    p0 = pair_index(1, 0)
    zp = pair_index(0, 1)
    zz = pair_index(0, 0)
    rho = np.zeros((9, 9), dtype=complex)
    rho[pp, pp] = 0.25 * (1.0 + pi_ab - sig * c4)
    rho[zz, zz] = 0.25 * (1.0 + pi_ab + sig * c4)
    rho[p0, p0] = 0.25 * (1.0 - pi_ab - dlt * c4)
    rho[zp, zp] = 0.25 * (1.0 - pi_ab + dlt * c4)
    rho[pp, zz] = -0.25j * sig * s4
    rho[zz, pp] = np.conj(rho[pp, zz])
    rho[p0, zp] = -0.25j * dlt * s4
    rho[zp, p0] = np.conj(rho[p0, zp])
    return rho


def gate_fidelity(tau_s: float, nu_dip_hz: float,
                  l_a: float = 1.0, l_b: float = 1.0) -> float:
    """Fidelity of the averaged gate output to |Phi0+> (closed form)."""
    return 0.25 * (1.0 + l_a * l_b
                   + (l_a + l_b) * np.sin(8.0 * np.pi * nu_dip_hz * tau_s))


def gate_echo_envelope(preset: NoisePreset, tau_s: float) -> float:
    """Per-defect DQ echo envelope <exp(2i chi)> over the gate of length 2 tau."""
    return envelope_from_schedule(preset, EchoSchedule.hahn(tau_s), delta_ms=2)


def find_bell_time(nu_dip_hz: float, gate: str = "dq",
                   target: np.ndarray | None = None) -> float:
    """Operational Bell time: argmax over tau of the simulated gate fidelity."""
    system = SpinSystem(nu_dip_hz=nu_dip_hz)
    builder = phi0p_gate_text if gate == "dq" else sq_gate_text
    if gate not in ("dq", "sq"):
        raise ValueError(f"unknown gate variant {gate!r}")
    if target is None and gate == "dq":
        target = bell_phi0p()
    start = basis_state(9, pair_index(0, 0))

    def fidelity(tau):
        compiled = compile_sequence(builder(tau), system)
        psi = ideal_unitary(compiled, system) @ start
        if target is not None:
            return state_fidelity(np.outer(psi, psi.conj()), target)
        # best Bell-family overlap: both variants end on the {|00>, |++>}
        # branch pair, so 2|c00||c++| is the fidelity maximized over the
        # relative phase of the target superposition
        return float(2.0 * abs(psi[pair_index(0, 0)]) * abs(psi[pair_index(1, 1)]))

    # one period of the entangling phase so the maximum is unique
    period = 1.0 / (4.0 * nu_dip_hz) if gate == "dq" else 1.0 / (2.0 * nu_dip_hz)
    taus = np.linspace(0.0, period, 257)
    values = [fidelity(t) for t in taus]
    k = int(np.argmax(values))
    lo = taus[max(k - 1, 0)]
    hi = taus[min(k + 1, taus.size - 1)]
    res = minimize_scalar(lambda t: -fidelity(t), bounds=(lo, hi), method="bounded",
                          options={"xatol": period * 1e-9})
    return float(res.x)


# --- Monte Carlo evolution ---------------------------------------------------

def evolve_mc(sequence: PulseSequence | str | CompiledSequence, system: SpinSystem,
              noise_a: NoisePreset | None, noise_b: NoisePreset | None,
              n_traj: int, seed: int, initial_state: np.ndarray | None = None,
              correlated: bool = False, detuning_a_hz: float = 0.0,
              detuning_b_hz: float = 0.0) -> np.ndarray:
    """Ensemble-averaged density matrix over random noise trajectories.

    Each defect draws noise phases from its own substream derived from the
    master seed, so results are independent of evaluation order; the
    correlated flag makes both defects see the identical noise field.
    """
    if n_traj < 1:
        raise ValueError("need at least one trajectory")
    compiled = (sequence if isinstance(sequence, CompiledSequence)
                else compile_sequence(sequence, system))
    if compiled.dim != 9:
        raise ValueError("Monte Carlo evolution runs on the electron-only space")
    bounds = compiled.wait_boundaries_s
    nseg = compiled.n_waits
    rng_a = np.random.default_rng([seed, 0])
    rng_b = np.random.default_rng([seed, 1])
    zeros = np.zeros((n_traj, max(nseg, 1)))
    if nseg == 0 or (noise_a is None and noise_b is None):
        ph_a = ph_b = zeros
    else:
        if correlated:
            if noise_a is None or noise_b is None:
                raise ValueError("correlated mode needs both presets")
            draw = max(nseg, 1)
            normals = rng_a.standard_normal((n_traj, draw))
            ph_a = segment_phase_samples(noise_a, bounds, n_traj, rng_a, normals=normals)
            ph_b = segment_phase_samples(noise_b, bounds, n_traj, rng_b, normals=normals)
        else:
            ph_a = (segment_phase_samples(noise_a, bounds, n_traj, rng_a)
                    if noise_a is not None else zeros)
            ph_b = (segment_phase_samples(noise_b, bounds, n_traj, rng_b)
                    if noise_b is not None else zeros)
    ms_a, ms_b = _pair_ms(9)
    if initial_state is None:
        initial_state = basis_state(9, pair_index(0, 0))
    state = np.tile(np.asarray(initial_state, dtype=complex), (n_traj, 1))
    nu = system.coupling_hz
    k = 0
    for kind, val in compiled.items:
        if kind == "unitary":
            state = state @ val.T
        else:
            det = free_evolution_diag(9, nu, val, detuning_a_hz, detuning_b_hz)
            noise = np.exp(-1j * (np.outer(ph_a[:, k], ms_a) + np.outer(ph_b[:, k], ms_b)))
            state = state * det[None, :] * noise
            k += 1
    return np.einsum("ni,nj->ij", state, state.conj()) / n_traj


def apply_depolarizing(rho: np.ndarray, q: float) -> np.ndarray:
    """Pulse-error channel: mix in the maximally mixed state with weight q."""
    if not (0.0 <= q <= 1.0):
        raise ValueError("depolarizing weight must lie in [0, 1]")
    d = rho.shape[0]
    return (1.0 - q) * rho + q * np.trace(rho).real * np.eye(d) / d


def fit_depolarizing_strength(f_ideal: float, f_target: float, dim: int = 9) -> float:
    """Weight q such that the depolarized fidelity equals f_target."""
    if f_ideal <= 1.0 / dim:
        raise ValueError("ideal fidelity must exceed the mixed-state value")
    q = (f_ideal - f_target) / (f_ideal - 1.0 / dim)
    if not (0.0 <= q <= 1.0):
        raise ValueError("target fidelity is not reachable by depolarization")
    return float(q)


# --- DEER ---------------------------------------------------------------------

def deer_frequency(system: SpinSystem, mode: str = "sq") -> float:
    """Oscillation frequency of the echo-detected coupling measurement.

    Computed from the diagonal pair Hamiltonian as the double energy
    difference of the levels the sequence interrogates, so the DQ value is
    exactly four times the SQ one.
    """
    from .system import build_pair_hamiltonian
    h = np.real(np.diag(build_pair_hamiltonian(system, "electron")))

    def e(ms_a, ms_b):
        return h[pair_index(ms_a, ms_b)]

    if mode == "sq":
        return float(e(1, 1) - e(1, 0) - e(0, 1) + e(0, 0))
    if mode == "dq":
        return float(e(1, 1) - e(1, -1) - e(-1, 1) + e(-1, -1))
    raise ValueError(f"unknown mode {mode!r}")


def deer_signal(system: SpinSystem, noise_a: NoisePreset | None,
                tau_grid_s: np.ndarray, mode: str = "sq") -> np.ndarray:
    """Echo signal I(tau) = L_A(2 tau) cos(2 pi f_mode tau)."""
    tau = np.asarray(tau_grid_s, dtype=float)
    if np.any(np.diff(tau) <= 0):
        raise ValueError("tau grid must be strictly ascending")
    f = deer_frequency(system, mode)
    dm = 1 if mode == "sq" else 2
    if noise_a is None:
        env = np.ones_like(tau)
    else:
        from .noise import decoherence_envelope
        env = np.array([decoherence_envelope(noise_a, "hahn", dm, 2.0 * t) for t in tau])
    return env * np.cos(2.0 * np.pi * f * tau)


def fit_deer_frequency(tau_grid_s: np.ndarray, signal: np.ndarray) -> float:
    """Least-squares frequency of a decaying cosine, seeded by an FFT peak."""
    from scipy.optimize import curve_fit
    tau = np.asarray(tau_grid_s, dtype=float)
    sig = np.asarray(signal, dtype=float)
    n_pad = 16 * tau.size
    spec = np.abs(np.fft.rfft(sig - sig.mean(), n=n_pad))
    freqs = np.fft.rfftfreq(n_pad, d=tau[1] - tau[0])
    f0 = freqs[int(np.argmax(spec))]
    if f0 == 0.0:
        f0 = freqs[1]

    def model(t, a, f, rate):
        return a * np.exp(-rate * t) * np.cos(2.0 * np.pi * f * t)

    popt, _ = curve_fit(model, tau, sig, p0=[1.0, f0, 0.0],
                        maxfev=20000)
    return float(abs(popt[1]))
