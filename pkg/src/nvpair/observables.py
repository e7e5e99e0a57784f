"""Readout, collective phase scans, FFT analysis, tomography, lifetimes.

Fluorescence is affine-calibrated: only frequencies and relative amplitudes
of scan signals are contractual, absolute levels are arbitrary units.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.optimize import curve_fit

from .engine import free_evolution_diag, pulse_unitary, transition_rotation
from .linalg import electron_index, pair_index, pair_label
from .noise import NoisePreset
from .sequences import PulseOp


@dataclass(frozen=True)
class MeasurementModel:
    """Fluorescence readout: alpha, beta weight the two defects' 0-state populations."""

    alpha: float = 1.0
    beta: float = 1.0
    offset: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("fluorescence coefficients must be positive")


@dataclass(frozen=True)
class ChargeModel:
    """Charge-state statistics and photon-count thresholding."""

    p_minus: float = 0.70
    bright_rate_hz: float = 2.0e4
    dark_rate_hz: float = 2.0e3
    window_s: float = 5.0e-3
    threshold: int = 40

    def __post_init__(self):
        if not 0.0 <= self.p_minus <= 1.0:
            raise ValueError("p_minus must lie in [0, 1]")
        if self.bright_rate_hz <= self.dark_rate_hz:
            raise ValueError("bright rate must exceed dark rate")


@dataclass(frozen=True)
class PhaseScan:
    t_s: np.ndarray
    signal: np.ndarray
    detuning_a_hz: float
    detuning_b_hz: float


@dataclass(frozen=True)
class SpectrumPeak:
    frequency_hz: float
    amplitude: float
    width_hz: float
    fit_ok: bool = True


def projector_ms0(defect: str, dim: int = 9) -> np.ndarray:
    """Projector onto mS = 0 of one defect in the 9-dim pair space."""
    if dim != 9:
        raise ValueError("readout operators live on the electron pair space")
    diag = np.zeros(9)
    for i in range(9):
        ma, mb = pair_label(i)
        m = ma if defect == "A" else mb
        diag[i] = 1.0 if m == 0 else 0.0
    return np.diag(diag).astype(complex)


def readout_p0(rho: np.ndarray, model: MeasurementModel) -> float:
    """Fluorescence value Tr[(alpha P0_A + beta P0_B) rho], affinely calibrated."""
    op = model.alpha * projector_ms0("A") + model.beta * projector_ms0("B")
    return float(model.scale * np.trace(op @ rho).real + model.offset)


# --- collective phase scans --------------------------------------------------

def _single_nv_scan(detuning_hz: float, t_grid: np.ndarray) -> np.ndarray:
    """Lone-defect branch: DQ superposition picking up phase at 2 x detuning.

    A defect whose partner is in the neutral charge state still runs through
    the sequence; its +1/-1 coherence evolves at twice the detuning and the
    closing pulses map the phase back to the 0-state population.
    """
    u1 = transition_rotation(np.pi, "0-", np.pi / 2) @ transition_rotation(
        np.pi / 2, "0+", np.pi / 2)
    psi0 = u1 @ np.array([0.0, 1.0, 0.0], dtype=complex)
    ms = np.array([1.0, 0.0, -1.0])
    out = np.empty(t_grid.size)
    for k, t in enumerate(t_grid):
        psi = np.exp(-2j * np.pi * detuning_hz * ms * t) * psi0
        psi = u1.conj().T @ psi
        out[k] = abs(psi[1]) ** 2
    return out


def phase_scan(rho9: np.ndarray, t_grid_s: np.ndarray, detuning_a_hz: float,
               detuning_b_hz: float, model: MeasurementModel,
               probe: np.ndarray | None = None, charge: ChargeModel | None = None,
               preselected: bool = True, hyperfine_random_sign: bool = True) -> PhaseScan:
    """Fluorescence vs free-evolution time under symmetric detunings.

    ``probe`` is the disentangling unitary applied before readout (identity
    if omitted).  The drive detuning of each defect takes the sign of its
    thermal nuclear spin, so the collective coherence splits evenly between
    the sum frequency and DC (the amplitude-halving convention) while a lone
    defect always oscillates at twice its detuning magnitude.  Without
    charge preselection the signal mixes the both-negative branch (weight
    p^2) with two lone-defect branches (weight p(1-p) each); the
    both-neutral branch only adds a constant.
    """
    t_grid = np.asarray(t_grid_s, dtype=float)
    if probe is None:
        probe = np.eye(9, dtype=complex)
    if hyperfine_random_sign:
        sign_pairs = [(sa, sb) for sa in (1.0, -1.0) for sb in (1.0, -1.0)]
    else:
        sign_pairs = [(1.0, 1.0)]
    collective = np.zeros(t_grid.size)
    for k, t in enumerate(t_grid):
        for sa, sb in sign_pairs:
            d = free_evolution_diag(9, 0.0, t, sa * detuning_a_hz, sb * detuning_b_hz)
            rho_t = (d[:, None] * rho9) * d.conj()[None, :]
            collective[k] += readout_p0(probe @ rho_t @ probe.conj().T, model)
        collective[k] /= len(sign_pairs)
    if charge is None or preselected:
        return PhaseScan(t_grid, collective, detuning_a_hz, detuning_b_hz)
    p = charge.p_minus
    single_a = model.alpha * _single_nv_scan(detuning_a_hz, t_grid)
    single_b = model.beta * _single_nv_scan(detuning_b_hz, t_grid)
    signal = (p * p * collective + p * (1.0 - p) * (single_a + single_b))
    return PhaseScan(t_grid, model.scale * signal + model.offset,
                     detuning_a_hz, detuning_b_hz)


# --- spectra ------------------------------------------------------------------

def _gauss(f, a, f0, s):
    return a * np.exp(-((f - f0) ** 2) / (2.0 * s ** 2))


def fft_spectrum(t_s: np.ndarray, signal: np.ndarray, zero_pad_factor: int = 8,
                 min_rel_amplitude: float = 0.25) -> list[SpectrumPeak]:
    """Zero-padded magnitude spectrum with a Gaussian fit per peak.

    Each local maximum above the relative floor is fitted over its own
    half-maximum region only, which keeps the slowly decaying dispersion
    tails of one-sided records out of the width estimate.
    """
    t = np.asarray(t_s, dtype=float)
    sig = np.asarray(signal, dtype=float)
    if t.size < 16:
        raise ValueError("need at least 16 samples")
    dt = t[1] - t[0]
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0.0):
        raise ValueError("time grid must be uniform")
    n_pad = zero_pad_factor * t.size
    mag = np.abs(np.fft.rfft(sig - sig.mean(), n=n_pad)) * 2.0 / t.size
    freqs = np.fft.rfftfreq(n_pad, d=dt)
    floor = min_rel_amplitude * mag.max()
    maxima = [k for k in range(1, mag.size - 1)
              if mag[k] >= mag[k - 1] and mag[k] > mag[k + 1] and mag[k] >= floor]
    peaks: list[SpectrumPeak] = []
    claimed: list[tuple[int, int]] = []
    for k in sorted(maxima, key=lambda i: -mag[i]):
        # fit over the contiguous region above half of this peak's height
        half = 0.5 * mag[k]
        lo = k
        while lo > 0 and mag[lo - 1] >= half and mag[lo - 1] <= mag[lo]:
            lo -= 1
        hi = k
        while hi < mag.size - 1 and mag[hi + 1] >= half and mag[hi + 1] <= mag[hi]:
            hi += 1
        if any(lo <= c_hi and hi >= c_lo for c_lo, c_hi in claimed):
            continue  # sidelobe or shoulder of an already fitted peak
        claimed.append((lo, hi))
        f_win, m_win = freqs[lo:hi + 1], mag[lo:hi + 1]
        sigma0 = max((freqs[hi] - freqs[lo]) / 2.355, freqs[1] - freqs[0])
        try:
            if f_win.size < 4:
                raise RuntimeError("region too small")
            popt, _ = curve_fit(_gauss, f_win, m_win, p0=[mag[k], freqs[k], sigma0],
                                maxfev=10000)
            peaks.append(SpectrumPeak(float(popt[1]), float(abs(popt[0])),
                                      float(abs(popt[2]))))
        except RuntimeError:
            peaks.append(SpectrumPeak(float(freqs[k]), float(mag[k]), float(sigma0),
                                      fit_ok=False))
    peaks.sort(key=lambda p: p.frequency_hz)
    return peaks


def spectrum_of_scan(scan: PhaseScan, zero_pad_factor: int = 8,
                     min_rel_amplitude: float = 0.25) -> list[SpectrumPeak]:
    return fft_spectrum(scan.t_s, scan.signal, zero_pad_factor, min_rel_amplitude)


def lifetime_from_width(width_hz: float) -> float:
    """Time-domain 1/e time of exp(-(t/T)^2) from its spectral Gaussian sigma."""
    if width_hz <= 0:
        raise ValueError("width must be positive")
    return 1.0 / (np.sqrt(2.0) * np.pi * width_hz)


# --- charge-state preselection -------------------------------------------------

def simulate_charge_records(charge: ChargeModel, n_shots: int, seed: int) -> dict:
    """Poisson photon counts per defect with random charge states."""
    rng = np.random.default_rng(seed)
    neg = rng.random((n_shots, 2)) < charge.p_minus
    rates = np.where(neg, charge.bright_rate_hz, charge.dark_rate_hz)
    counts = rng.poisson(rates * charge.window_s)
    return {"counts": counts, "negative": neg}


def charge_preselect(records: dict, charge: ChargeModel) -> dict:
    """Threshold classification of simulated count records."""
    counts = np.asarray(records["counts"])
    neg = np.asarray(records["negative"], dtype=bool)
    classified = counts > charge.threshold
    kept = classified.all(axis=1)
    truly_both = neg.all(axis=1)
    n = counts.shape[0]
    false_keep = float(np.sum(kept & ~truly_both)) / max(int(np.sum(kept)), 1)
    false_drop = float(np.sum(~kept & truly_both)) / max(int(np.sum(truly_both)), 1)
    return {
        "kept_fraction": float(np.mean(kept)),
        "false_keep_rate": false_keep,
        "false_drop_rate": false_drop,
        "keep_mask": kept,
    }


# --- tomography -----------------------------------------------------------------

_PI_TRANSITIONS = ("0+", "0-", "dq")


def _defect_plan(ms_from_row: int, ms_from_col: int) -> list[str]:
    """Shortest pi-pulse list sending row level to -1 and column level to +1."""
    if ms_from_row == ms_from_col:
        raise ValueError("single-defect coherence is not reachable by local pi pulses")
    i_row = electron_index(ms_from_row)
    i_col = electron_index(ms_from_col)
    target_row, target_col = electron_index(-1), electron_index(1)
    candidates = [[]]
    candidates += [[t] for t in _PI_TRANSITIONS]
    candidates += [[t1, t2] for t1 in _PI_TRANSITIONS for t2 in _PI_TRANSITIONS]
    for seq in candidates:
        u = np.eye(3, dtype=complex)
        for t in seq:
            u = transition_rotation(np.pi, t, np.pi / 2) @ u
        if abs(u[target_row, i_row]) > 0.999 and abs(u[target_col, i_col]) > 0.999:
            return seq
    raise ValueError("no pi-pulse product maps the coherence onto the target slot")


def tomography_plan(slot: tuple[tuple[int, int], tuple[int, int]]) -> list[PulseOp]:
    """Local pi-pulse prefix moving a pair coherence onto the ((-1,-1),(+1,+1)) slot.

    ``slot`` is ((mS_A, mS_B), (mS_A', mS_B')) labelling the row and column
    basis states of the probed coherence.
    """
    (ma, mb), (ma2, mb2) = slot
    ops: list[PulseOp] = []
    for defect, pair in (("A", (ma, ma2)), ("B", (mb, mb2))):
        for t in _defect_plan(*pair):
            ops.append(PulseOp(np.pi, defect, t, np.pi / 2))
    return ops


def plan_unitary(plan: list[PulseOp], dim: int = 9) -> np.ndarray:
    u = np.eye(dim, dtype=complex)
    for op in plan:
        u = pulse_unitary(op, dim) @ u
    return u


_TARGET_SLOT = (pair_index(-1, -1), pair_index(1, 1))


def probe_amplitude(rho9: np.ndarray, slot, l_second: float = 1.0) -> complex:
    """Synthetic measured coherence amplitude for one tomography probe.

    The detuning convention splits each coherence evenly between the
    collective-frequency slot and DC, so the oscillation amplitude carries
    half the coherence; the second (disentangling) gate attenuates it by its
    own decoherence envelope ``l_second``.
    """
    u = plan_unitary(tomography_plan(slot))
    rho_p = u @ rho9 @ u.conj().T
    return 0.5 * l_second * complex(rho_p[_TARGET_SLOT[0], _TARGET_SLOT[1]])


def synthesize_tomography_data(rho9: np.ndarray, l_second: float = 1.0,
                               sigma: float = 0.0, seed: int = 0) -> dict:
    """Full synthetic probe set: pair coherences, local coherences, populations."""
    rng = np.random.default_rng(seed)

    def noisy(z):
        if sigma == 0.0:
            return z
        return z + sigma * (rng.standard_normal() + 1j * rng.standard_normal())

    pair_coh = {}
    local_coh = {}
    for i in range(9):
        for j in range(i + 1, 9):
            ma, mb = pair_label(i)
            ma2, mb2 = pair_label(j)
            if ma != ma2 and mb != mb2:
                pair_coh[(i, j)] = noisy(probe_amplitude(rho9, ((ma, mb), (ma2, mb2)),
                                                         l_second))
            else:
                # local coherence read out directly by a pi/2 projection
                local_coh[(i, j)] = noisy(0.5 * l_second * complex(rho9[i, j]))
    pops = np.real(np.diag(rho9)).copy()
    if sigma > 0.0:
        pops = pops + sigma * rng.standard_normal(9)
    return {"pair": pair_coh, "local": local_coh, "populations": pops,
            "l_second": l_second}


def reconstruct_density_matrix(data: dict) -> np.ndarray:
    """Linear inversion of the synthetic probe set back to a 9x9 estimate."""
    l_second = data["l_second"]
    if l_second <= 0:
        raise ValueError("second-gate attenuation must be positive")
    pops = np.asarray(data["populations"], dtype=float)
    total = pops.sum()
    if total <= 0:
        raise ValueError("populations cannot be normalized")
    rho = np.diag(pops / total).astype(complex)
    for (i, j), meas in data["local"].items():
        rho[i, j] = meas / (0.5 * l_second)
        rho[j, i] = np.conj(rho[i, j])
    for (i, j), meas in data["pair"].items():
        ma, mb = pair_label(i)
        ma2, mb2 = pair_label(j)
        u = plan_unitary(tomography_plan(((ma, mb), (ma2, mb2))))
        # the plan maps entry (i, j) onto the target slot with a known phase
        factor = u[_TARGET_SLOT[0], i] * np.conj(u[_TARGET_SLOT[1], j])
        if abs(factor) < 1e-9:
            raise ValueError("tomography plan does not reach the target slot")
        rho[i, j] = meas / (0.5 * l_second) / factor
        rho[j, i] = np.conj(rho[i, j])
    return rho


# --- entangled-state lifetime ----------------------------------------------------

@dataclass(frozen=True)
class LifetimeResult:
    lifetime_s: float
    peak: SpectrumPeak
    t_s: np.ndarray = dc_field(repr=False, default=None)
    signal: np.ndarray = dc_field(repr=False, default=None)


def entanglement_lifetime(kind: str, preset_a: NoisePreset, preset_b: NoisePreset,
                          correlated: bool = False, carrier_hz: float = 6.0e6,
                          t_max_s: float = 80.0e-6, n_samples: int = 2048,
                          n_traj: int = 4000, seed: int = 0,
                          zero_pad_factor: int = 16) -> LifetimeResult:
    """1/e lifetime of a DQ Bell coherence from a Gaussian spectral fit.

    The Phi coherence accumulates the sum of the two defects' random DQ
    phases, the Psi coherence their difference, so identical (correlated)
    noise cancels exactly for Psi.  Presets are interpreted on the DQ
    transition (delta_ms_ref = 2).

    ``correlated=True`` means both defects see one and the same noise field
    (drawn with preset_a's amplitude; preset_b's amplitude is ignored), which
    makes the Psi family a decoherence-free subspace.
    """
    if kind not in ("phi", "psi"):
        raise ValueError(f"unknown state family {kind!r}")
    # keep the carrier well below Nyquist for long scans
    n_samples = max(n_samples, int(np.ceil(4.0 * carrier_hz * t_max_s)))
    t = np.linspace(0.0, t_max_s, n_samples)
    rng = np.random.default_rng(seed)
    b_a = preset_a.sigma_b_hz * rng.standard_normal(n_traj)
    if correlated:
        b_b = b_a
    else:
        b_b = preset_b.sigma_b_hz * rng.standard_normal(n_traj)
    sign = 1.0 if kind == "phi" else -1.0
    # DQ phase rate of each defect: 2 * 2 pi b
    rates = 2.0 * 2.0 * np.pi * (b_a + sign * b_b)
    envelope = np.zeros(n_samples, dtype=complex)
    chunk = max(1, int(2e6 / n_samples))
    for lo in range(0, n_traj, chunk):
        envelope += np.exp(1j * np.outer(rates[lo:lo + chunk], t)).sum(axis=0)
    envelope /= n_traj
    signal = np.real(envelope * np.exp(2j * np.pi * carrier_hz * t))
    # the coherence envelope is even in time: mirror the record about t = 0
    # so the spectrum is the clean Gaussian line, free of one-sided
    # dispersion tails
    sym = np.concatenate([signal[:0:-1], signal])
    t_sym = np.arange(sym.size) * (t[1] - t[0])
    peaks = fft_spectrum(t_sym, sym, zero_pad_factor)
    if not peaks:
        raise ValueError("no spectral peak found")
    peak = min(peaks, key=lambda p: abs(p.frequency_hz - carrier_hz))
    if not peak.fit_ok:
        raise ValueError("spectral Gaussian fit failed")
    return LifetimeResult(lifetime_from_width(peak.width_hz), peak, t, signal)
