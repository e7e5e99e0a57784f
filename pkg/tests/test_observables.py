import numpy as np
import pytest

from nvpair.engine import (bell_phi0p, compile_sequence, convert_state,
                           find_bell_time, ideal_unitary, phi0p_gate_text,
                           pulse_unitary)
from nvpair.sequences import PulseOp
from nvpair.system import reference_system
from nvpair.linalg import basis_state, pair_index, projector, state_fidelity
from nvpair.noise import NoisePreset
from nvpair.observables import (ChargeModel, MeasurementModel, charge_preselect,
                                entanglement_lifetime, fft_spectrum,
                                lifetime_from_width, phase_scan, projector_ms0,
                                readout_p0, reconstruct_density_matrix,
                                simulate_charge_records,
                                synthesize_tomography_data, tomography_plan)


def _dq_bell_rho():
    psi = (basis_state(9, pair_index(1, 1))
           + basis_state(9, pair_index(-1, -1))) / np.sqrt(2.0)
    return projector(psi)


def test_readout_p0_counts_both_defects():
    rho = projector(basis_state(9, pair_index(0, 0)))
    assert readout_p0(rho, MeasurementModel()) == pytest.approx(2.0)
    rho = projector(basis_state(9, pair_index(0, 1)))
    assert readout_p0(rho, MeasurementModel(alpha=2.0)) == pytest.approx(2.0)
    assert np.trace(projector_ms0("A")).real == pytest.approx(3.0)


def test_fft_spectrum_single_tone():
    t = np.linspace(0.0, 20e-6, 1024)
    sig = 0.7 * np.cos(2 * np.pi * 4.0e6 * t)
    (peak,) = fft_spectrum(t, sig)
    assert peak.frequency_hz == pytest.approx(4.0e6, rel=1e-3)
    assert peak.amplitude == pytest.approx(0.7, rel=0.1)


def test_fft_spectrum_rejects_nonuniform_grid():
    t = np.array([0.0, 1.0, 2.0, 4.0] + list(range(5, 20)), dtype=float)
    with pytest.raises(ValueError):
        fft_spectrum(t, np.zeros_like(t))


def test_phase_scan_oscillates_at_collective_frequency():
    system = reference_system()
    tau = find_bell_time(system.coupling_hz)
    u_gate = ideal_unitary(compile_sequence(phi0p_gate_text(tau), system),
                           system)
    rho = convert_state(
        projector(u_gate @ basis_state(9, pair_index(0, 0))))
    u_conv = pulse_unitary(PulseOp(np.pi, "AB", "0-", np.pi / 2), 9)
    probe = (u_conv @ u_gate).conj().T
    t = np.linspace(0.0, 10e-6, 512)
    scan = phase_scan(rho, t, 1.0e6, 1.0e6, MeasurementModel(), probe=probe,
                      hyperfine_random_sign=False)
    peaks = fft_spectrum(scan.t_s, scan.signal)
    # a (dmS = 2, dmS = 2) pair coherence beats at twice the summed detuning
    assert any(abs(p.frequency_hz - 4.0e6) < 1e5 for p in peaks)


def test_charge_preselection_threshold():
    charge = ChargeModel()
    records = simulate_charge_records(charge, 20000, seed=0)
    out = charge_preselect(records, charge)
    assert out["kept_fraction"] == pytest.approx(charge.p_minus ** 2, abs=0.02)
    assert out["false_keep_rate"] < 0.01
    assert out["false_drop_rate"] < 0.01


def test_tomography_plan_reaches_target_slot():
    plan = tomography_plan(((-1, -1), (1, 1)))
    assert plan == []  # already on the target coherence
    plan = tomography_plan(((0, 0), (1, 1)))
    assert len(plan) > 0
    with pytest.raises(ValueError):
        tomography_plan(((1, 1), (1, -1)))  # B row and column coincide


def test_tomography_round_trip_with_attenuation_and_noise():
    rho = _dq_bell_rho()
    data = synthesize_tomography_data(rho, l_second=0.8, sigma=1e-4, seed=1)
    recon = reconstruct_density_matrix(data)
    psi = (basis_state(9, pair_index(1, 1))
           + basis_state(9, pair_index(-1, -1))) / np.sqrt(2.0)
    assert state_fidelity(recon, psi) == pytest.approx(1.0, abs=5e-3)


def test_tomography_round_trip_converted_gate_state():
    rho = convert_state(projector(bell_phi0p()))
    data = synthesize_tomography_data(rho, l_second=0.9)
    recon = reconstruct_density_matrix(data)
    assert np.max(np.abs(recon - rho)) < 1e-10


def test_lifetime_gaussian_width_inversion():
    assert lifetime_from_width(1.0 / (np.sqrt(2.0) * np.pi)) == \
        pytest.approx(1.0)
    with pytest.raises(ValueError):
        lifetime_from_width(0.0)


def test_entanglement_lifetime_matches_gaussian_oracle():
    # equal independent quasi-static noise: the Phi coherence decays with
    # the combined time sqrt(2 / (1/Ta^2 + 1/Tb^2)), here equal to T2* itself
    preset = NoisePreset(25e-6, 1.0, delta_ms_ref=2)
    res = entanglement_lifetime("phi", preset, preset, n_traj=6000, seed=0)
    assert res.lifetime_s == pytest.approx(25e-6, rel=0.1)


def test_entanglement_lifetime_rejects_unknown_kind():
    preset = NoisePreset(25e-6, 1.0)
    with pytest.raises(ValueError):
        entanglement_lifetime("chi", preset, preset)
