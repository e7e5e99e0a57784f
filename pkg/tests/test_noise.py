import numpy as np
import pytest

from nvpair.noise import (EchoSchedule, NoisePreset, calibrate_ou_sigma,
                          decoherence_envelope, envelope_from_schedule,
                          modulation_fid, modulation_hahn,
                          ou_segment_covariance, sample_phases,
                          apply_dephasing)


def test_preset_validation():
    with pytest.raises(ValueError):
        NoisePreset(t2_star_s=2e-6, t2_s=1e-6)
    with pytest.raises(ValueError):
        NoisePreset(t2_star_s=1e-6, t2_s=1e-3, kind="ornstein-uhlenbeck")


def test_preset_json_round_trip():
    p = NoisePreset(27.8e-6, 1.0, delta_ms_ref=2)
    assert NoisePreset.from_json_dict(p.to_json_dict()) == p


def test_fid_envelope_matches_sampled_phases():
    preset = NoisePreset(10e-6, 1.0)
    t = 8e-6
    rng = np.random.default_rng(0)
    phases = sample_phases(preset, EchoSchedule.fid(t), 1, 200000, rng)
    sampled = np.mean(np.exp(1j * phases)).real
    analytic = decoherence_envelope(preset, "fid", 1, t)
    assert sampled == pytest.approx(analytic, abs=5e-3)
    assert analytic == pytest.approx(np.exp(-0.5 * (t / 10e-6) ** 2), rel=1e-12)


def test_quasi_static_hahn_refocuses():
    preset = NoisePreset(10e-6, 1.0)
    assert envelope_from_schedule(preset, EchoSchedule.hahn(20e-6), 1) == \
        pytest.approx(1.0)


def test_dq_envelope_four_times_faster():
    # a |delta_mS| = 2 coherence dephases at twice the field-to-phase rate,
    # so the Gaussian exponent grows fourfold
    preset = NoisePreset(10e-6, 1.0)
    l1 = decoherence_envelope(preset, "fid", 1, 5e-6)
    l2 = decoherence_envelope(preset, "fid", 2, 5e-6)
    assert l2 == pytest.approx(l1 ** 4, rel=1e-12)


def test_ou_covariance_limits():
    bounds = np.array([0.0, 1e-6, 2e-6])
    cov_long = ou_segment_covariance(bounds, 1.0)
    # long correlation time: behaves like a frozen field, cov -> outer(d, d)
    d = np.diff(bounds)
    np.testing.assert_allclose(cov_long, np.outer(d, d), rtol=1e-4)


def test_ou_calibration_hits_1_over_e():
    t2, tau_c = 60e-6, 10e-6
    sigma = calibrate_ou_sigma(t2, tau_c)
    preset = NoisePreset(1e-6, t2, kind="ornstein-uhlenbeck", tau_c_s=tau_c)
    assert preset.sigma_b_hz == pytest.approx(sigma, rel=1e-9)
    env = envelope_from_schedule(preset, EchoSchedule.hahn(t2 / 2.0), 1)
    assert env == pytest.approx(np.exp(-1.0), rel=1e-9)


def test_hahn_modulation_collinear_fields_is_one():
    h1 = np.array([0.0, 0.0, 3.0e6])
    h2 = np.array([0.0, 0.0, -2.5e6])
    for t in np.linspace(1e-8, 3e-6, 7):
        assert modulation_hahn(h1, h2, float(t)) == pytest.approx(1.0,
                                                                  abs=1e-12)


def test_fid_modulation_reduces_to_cosine():
    h = np.array([1.1e6, 0.0, 2.2e6])
    zero = np.zeros(3)
    for t in np.linspace(1e-8, 2e-6, 7):
        expected = np.cos(np.pi * np.linalg.norm(h) * t)
        assert modulation_fid(h, zero, float(t)) == pytest.approx(expected,
                                                                  abs=1e-12)


def test_apply_dephasing_scales_coherences():
    rho = np.full((9, 9), 1.0 / 9.0, dtype=complex)
    out = apply_dephasing(rho, 0.5, 1.0)
    # populations untouched
    np.testing.assert_allclose(np.diag(out), np.diag(rho))
    # a (dmA=2, dmB=0) coherence is scaled by 0.5**4
    assert abs(out[0, 6]) == pytest.approx(0.5 ** 4 / 9.0)
