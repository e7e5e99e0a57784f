import numpy as np
import pytest

from nvpair.system import (AXIS_111, AXIS_1M1M1, FieldConfig, NvOrientation,
                           PairGeometry, SpinConstants, SpinSystem,
                           build_pair_hamiltonian, conditional_nuclear_field,
                           dipolar_angular_factor, dipolar_coupling,
                           level_energies, max_distance_from_coupling,
                           reference_system)

CONSTANTS = SpinConstants()
ORI_A = NvOrientation(AXIS_111, "A")
ORI_B = NvOrientation(AXIS_1M1M1, "B")


def test_level_energies_zero_field():
    field = FieldConfig(0.0, AXIS_111)
    e = level_energies(ORI_A, field, CONSTANTS)
    assert e[0] == pytest.approx(0.0, abs=1.0)
    assert e[1] == pytest.approx(CONSTANTS.delta_hz, rel=1e-12)
    assert e[-1] == pytest.approx(CONSTANTS.delta_hz, rel=1e-12)


def test_level_energies_aligned_field_zeeman_split():
    b = 32.0
    field = FieldConfig.from_polar(b, ORI_A, polar_deg=0.0)
    e = level_energies(ORI_A, field, CONSTANTS)
    split = abs(e[1] - e[-1])
    assert split == pytest.approx(2.0 * CONSTANTS.gamma_e_hz_per_g * b,
                                  rel=1e-6)


def test_conditional_field_aligned_geometry():
    field = FieldConfig.from_polar(32.0, ORI_A, polar_deg=0.0)
    h_plus = conditional_nuclear_field(1, ORI_A, field, CONSTANTS)
    h_minus = conditional_nuclear_field(-1, ORI_A, field, CONSTANTS)
    # aligned field: both conditional fields are along the defect axis (z)
    assert abs(h_plus[0]) < 1e-6 and abs(h_plus[1]) < 1e-6
    assert h_plus[2] - h_minus[2] == pytest.approx(2.0 * CONSTANTS.a_n_hz,
                                                   rel=1e-9)


def test_dipolar_angular_factor_range():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = rng.standard_normal(3)
        f = dipolar_angular_factor(AXIS_111, AXIS_1M1M1, n)
        assert -3.0 <= f <= 3.0


def test_dipolar_coupling_scales_inverse_cube():
    geo1 = PairGeometry(20.0, AXIS_111 + AXIS_1M1M1)
    geo2 = PairGeometry(40.0, AXIS_111 + AXIS_1M1M1)
    c1 = dipolar_coupling(geo1, ORI_A, ORI_B, CONSTANTS)
    c2 = dipolar_coupling(geo2, ORI_A, ORI_B, CONSTANTS)
    assert c1 / c2 == pytest.approx(8.0, rel=1e-12)


def test_max_distance_from_coupling():
    r_max = max_distance_from_coupling(4.93e3, ORI_A, ORI_B, CONSTANTS)
    assert 20.0 < r_max < 40.0


def test_spin_system_json_round_trip():
    system = reference_system()
    clone = SpinSystem.from_json(system.to_json())
    assert clone.coupling_hz == pytest.approx(system.coupling_hz)
    np.testing.assert_allclose(clone.orientation_a.axis,
                               system.orientation_a.axis)
    np.testing.assert_allclose(
        build_pair_hamiltonian(clone, "electron"),
        build_pair_hamiltonian(system, "electron"), atol=1e-6)


def test_pair_hamiltonian_is_diagonal_and_sized():
    system = reference_system()
    h9 = build_pair_hamiltonian(system, "electron")
    h36 = build_pair_hamiltonian(system, "full")
    assert h9.shape == (9, 9) and h36.shape == (36, 36)
    assert np.max(np.abs(h9 - np.diag(np.diag(h9)))) == 0.0
