import numpy as np
import pytest

from nvpair.linalg import basis_state, check_density_matrix, pair_index, \
    projector, state_fidelity
from nvpair.nuclear import (NuclearRabiParams, effective_g, electron_state,
                            fit_contrast, fit_storage_t1, nuclear_rabi,
                            nuclear_rabi_exact, nuclear_rabi_params,
                            nuclear_mutual_information, nuclear_state,
                            product_residual, round_trip_efficiency,
                            simulate_storage_decay, storage_decay, swap_store,
                            swap_retrieve, thermal_nuclear_state)


def _bell_vec9():
    return (basis_state(9, pair_index(1, 1))
            + basis_state(9, pair_index(-1, -1))) / np.sqrt(2.0)


def _bell_rho36():
    return thermal_nuclear_state(projector(_bell_vec9()))


def test_effective_g_enhancement_sign():
    g0 = effective_g(0)
    g1 = effective_g(1)
    # transverse enhancement flips sign between mS=0 and mS=+-1
    assert (g0[0, 0] - 1.0) == pytest.approx(-2.0 * (g1[0, 0] - 1.0), rel=1e-9)
    assert g0[2, 2] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        effective_g(2)


def test_nuclear_rabi_closed_form_matches_exact_propagator():
    for b in (10.0, 40.0, 60.0):
        for theta in np.deg2rad([5.0, 54.5, 90.0, 150.0]):
            p = nuclear_rabi_params(b, theta)
            for t in np.linspace(0.0, 2.0 / p.omega_hz, 9):
                assert nuclear_rabi(b, theta, t_s=float(t)) == pytest.approx(
                    nuclear_rabi_exact(b, theta, t_s=float(t)), abs=1e-12)


def test_nuclear_rabi_contrast_limits():
    assert nuclear_rabi_params(40.0, np.pi / 2).contrast == pytest.approx(1.0)
    assert NuclearRabiParams(0.0, 1.0).contrast == pytest.approx(0.0)
    with pytest.raises(ValueError):
        nuclear_rabi_params(0.0, 1.0)


def test_swap_store_is_ideal_and_separable():
    rho = _bell_rho36()
    stored = swap_store(rho)
    assert stored.efficiency == pytest.approx(1.0, abs=1e-12)
    # the stored state factorizes into electrons x nuclear Bell
    assert product_residual(stored.rho) < 1e-12
    assert nuclear_mutual_information(stored.rho) == pytest.approx(2.0,
                                                                   abs=1e-9)
    check_density_matrix(nuclear_state(stored.rho))


def test_swap_round_trip_restores_electron_bell():
    rho = _bell_rho36()
    before = electron_state(rho)
    back = electron_state(swap_retrieve(swap_store(rho)))
    assert np.max(np.abs(back - before)) < 1e-12
    assert round_trip_efficiency(rho) == pytest.approx(1.0, abs=1e-12)


def test_reduced_contrast_round_trip_and_fit():
    rho = _bell_rho36()
    eff = round_trip_efficiency(rho, contrast=0.9)
    assert eff < 1.0
    c = fit_contrast(eff, rho)
    assert c == pytest.approx(0.9, abs=1e-8)
    c41 = fit_contrast(0.41, rho)
    assert round_trip_efficiency(rho, c41) == pytest.approx(0.41, abs=1e-8)
    with pytest.raises(ValueError):
        fit_contrast(0.2, rho)


def test_swap_store_input_validation():
    with pytest.raises(ValueError):
        swap_store(np.eye(9, dtype=complex) / 9.0)
    with pytest.raises(TypeError):
        swap_retrieve(np.eye(36, dtype=complex) / 36.0)


def test_storage_decay_and_t1_fit():
    t = np.linspace(0.0, 3e-3, 25)
    analytic = storage_decay(1.0, t, t1_s=1.12e-3)
    sampled = simulate_storage_decay(1.0, t, t1_s=1.12e-3, n_traj=200000,
                                     seed=5)
    assert np.max(np.abs(sampled - analytic)) < 5e-3
    t1, eff0 = fit_storage_t1(t, analytic)
    assert t1 == pytest.approx(1.12e-3, rel=1e-6)
    assert eff0 == pytest.approx(1.0, rel=1e-6)
    with pytest.raises(ValueError):
        storage_decay(1.0, -1.0)


def test_thermal_nuclear_state_shape_checks():
    with pytest.raises(ValueError):
        thermal_nuclear_state(np.eye(4, dtype=complex) / 4.0)
    rho = _bell_rho36()
    assert state_fidelity(electron_state(rho), _bell_vec9()) == \
        pytest.approx(1.0, abs=1e-12)
