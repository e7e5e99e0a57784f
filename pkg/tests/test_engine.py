import numpy as np
import pytest

from nvpair.engine import (apply_depolarizing, bell_phi0p, compile_sequence,
                           convert_state, deer_frequency, deer_signal,
                           embed_full, evolve_analytic_phi0p, evolve_mc,
                           find_bell_time, fit_deer_frequency,
                           fit_depolarizing_strength, gate_fidelity,
                           ideal_unitary, phi0p_gate_text, pulse_unitary,
                           sq_gate_text, transition_rotation)
from nvpair.linalg import (basis_state, check_density_matrix, is_unitary,
                           pair_index, state_fidelity)
from nvpair.noise import NoisePreset
from nvpair.sequences import Condition, PulseOp
from nvpair.system import reference_system

NU = 4.93e3
TAU_STAR = 1.0 / (16.0 * NU)


def test_transition_rotation_y_phase_blocks():
    u = transition_rotation(np.pi, "0+", np.pi / 2)
    # y-phase pi pulse: |+> -> +|0>, |0> -> -|+>
    np.testing.assert_allclose(u @ [1, 0, 0], [0, 1, 0], atol=1e-12)
    np.testing.assert_allclose(u @ [0, 1, 0], [-1, 0, 0], atol=1e-12)
    assert is_unitary(transition_rotation(1.234, "dq", 0.7))


def test_pulse_unitary_conditional_requires_full_space():
    op = PulseOp(np.pi, "A", "0+", 0.0, condition=Condition("mI", 0.5, "A"))
    with pytest.raises(ValueError):
        pulse_unitary(op, 9)


def test_embed_full_rejects_self_condition():
    proj = np.diag([1.0, 0.0]).astype(complex)
    with pytest.raises(ValueError):
        embed_full(np.eye(2, dtype=complex), "Anuc", ("Anuc", proj))


def test_bell_time_and_ideal_gate():
    tau = find_bell_time(NU)
    assert tau == pytest.approx(TAU_STAR, rel=1e-6)
    system = reference_system(NU)
    compiled = compile_sequence(phi0p_gate_text(tau), system)
    psi = ideal_unitary(compiled, system) @ basis_state(9, pair_index(0, 0))
    assert state_fidelity(np.outer(psi, psi.conj()), bell_phi0p()) == \
        pytest.approx(1.0, abs=1e-12)


def test_sq_gate_is_four_times_slower():
    tau_sq = find_bell_time(NU, "sq")
    assert tau_sq == pytest.approx(4.0 * TAU_STAR, rel=1e-6)


def test_analytic_state_properties():
    for l_a, l_b in [(1.0, 1.0), (0.8, 0.95), (0.3, 0.6)]:
        rho = evolve_analytic_phi0p(TAU_STAR, NU, l_a, l_b)
        check_density_matrix(rho)
        assert state_fidelity(rho, bell_phi0p()) == pytest.approx(
            gate_fidelity(TAU_STAR, NU, l_a, l_b), abs=1e-12)


def test_mc_matches_analytic_with_quasi_static_noise():
    system = reference_system(NU)
    preset = NoisePreset(20e-6, 1.0, delta_ms_ref=2)
    rho = evolve_mc(phi0p_gate_text(TAU_STAR), system, preset, preset,
                    2000, seed=3)
    check_density_matrix(rho)
    # quasi-static noise refocuses over the echoed gate: L = 1
    np.testing.assert_allclose(rho, evolve_analytic_phi0p(TAU_STAR, NU),
                               atol=1e-10)


def test_mc_is_seed_deterministic():
    system = reference_system(NU)
    preset = NoisePreset(20e-6, 1.0, kind="ornstein-uhlenbeck", tau_c_s=5e-6)
    a = evolve_mc(sq_gate_text(TAU_STAR), system, preset, None, 100, seed=7)
    b = evolve_mc(sq_gate_text(TAU_STAR), system, preset, None, 100, seed=7)
    np.testing.assert_array_equal(a, b)


def test_deer_dq_is_four_times_sq():
    system = reference_system()
    assert deer_frequency(system, "dq") == pytest.approx(
        4.0 * deer_frequency(system, "sq"), rel=1e-9)


def test_deer_fit_recovers_frequency():
    system = reference_system()
    tau = np.linspace(1e-6, 600e-6, 400)
    sig = deer_signal(system, NoisePreset(2e-6, 300e-6), tau, "sq")
    assert fit_deer_frequency(tau, sig) == pytest.approx(4.93e3, rel=1e-6)


def test_depolarizing_fit_and_channel():
    rho = evolve_analytic_phi0p(TAU_STAR, NU)
    f0 = state_fidelity(rho, bell_phi0p())
    q = fit_depolarizing_strength(f0, 0.67)
    assert state_fidelity(apply_depolarizing(rho, q), bell_phi0p()) == \
        pytest.approx(0.67, abs=1e-12)
    with pytest.raises(ValueError):
        fit_depolarizing_strength(0.1, 0.67)


def test_convert_state_maps_families():
    rho = np.outer(bell_phi0p(), bell_phi0p().conj())
    out = convert_state(rho)
    pp, mm = pair_index(1, 1), pair_index(-1, -1)
    assert np.real(out[pp, pp]) == pytest.approx(0.5, abs=1e-12)
    assert np.real(out[mm, mm]) == pytest.approx(0.5, abs=1e-12)
