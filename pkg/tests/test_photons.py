import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nvpair.photons import (DIAGONAL_PROBES, EmissionModel, bell_state,
                            classical_correlation_matrix, classical_fidelity,
                            coincidence_prob, gated_coincidence,
                            gated_contrast, histogram_from_delays,
                            infer_weights, read_timestamp_channels,
                            simulate_hbt, simulate_probe_counts,
                            state_populations)

MODEL = EmissionModel(0.4, 0.2)


def test_emission_model_validation():
    with pytest.raises(ValueError):
        EmissionModel(0.2, 0.4)
    with pytest.raises(ValueError):
        EmissionModel(0.4, 0.2, tau_bright_s=0.0)


def test_coincidence_prob_ordering():
    # Phi piles population on double-bright/double-dark configurations, so it
    # coincides more often than an uncorrelated state; Psi less often
    phi = coincidence_prob("phi", MODEL)
    unc = coincidence_prob("uncorrelated", MODEL)
    psi = coincidence_prob("psi", MODEL)
    assert phi > unc > psi
    assert phi == pytest.approx((0.4 ** 2 + 0.2 ** 2) / (2 * 0.6))
    assert psi == pytest.approx(0.4 * 0.2 / 0.6)
    with pytest.raises(ValueError):
        coincidence_prob("ghz", MODEL)


def test_infer_weights_recovers_endpoints():
    w = infer_weights(coincidence_prob("phi", MODEL), MODEL)
    assert (w.alpha_sq, w.beta_sq) == (pytest.approx(1.0), pytest.approx(0.0))
    w = infer_weights(coincidence_prob("psi", MODEL), MODEL)
    assert (w.alpha_sq, w.beta_sq) == (pytest.approx(0.0), pytest.approx(1.0))
    with pytest.raises(ValueError):
        infer_weights(0.9, MODEL)


@settings(max_examples=200, deadline=None)
@given(k1=st.floats(0.01, 0.9), gap=st.floats(0.01, 0.5),
       alpha_sq=st.floats(0.0, 1.0))
def test_infer_weights_round_trip(k1, gap, alpha_sq):
    k0 = min(k1 + gap, 0.999)
    model = EmissionModel(k0, k1)
    s = (alpha_sq * coincidence_prob("phi", model)
         + (1.0 - alpha_sq) * coincidence_prob("psi", model))
    w = infer_weights(s, model)
    assert w.alpha_sq == pytest.approx(alpha_sq, abs=1e-8)
    assert w.alpha_sq + w.beta_sq == pytest.approx(1.0, abs=1e-8)


def test_gating_increases_contrast():
    assert gated_contrast(MODEL, 0.0) == pytest.approx(0.222, abs=2e-3)
    assert gated_contrast(MODEL, 12.7) == pytest.approx(0.284, abs=2e-3)
    assert gated_contrast(MODEL, 12.7) > gated_contrast(MODEL, 0.0)


def test_hbt_simulation_matches_analytic_rate():
    for kind in ("phi", "psi", "uncorrelated"):
        hist = simulate_hbt(kind, MODEL, shots=200000, gate_ns=12.7, seed=11)
        expected = gated_coincidence(kind, MODEL, 12.7)
        assert hist.rate == pytest.approx(expected, rel=0.03)
    with pytest.raises(ValueError):
        simulate_hbt("phi", MODEL, 100, gate_ns=-1.0)
    with pytest.raises(ValueError):
        simulate_hbt(np.array([0.5, 0.5, 0.5, 0.5]), MODEL, 100)


def test_histogram_round_trip_from_file(tmp_path):
    rng = np.random.default_rng(3)
    start = np.cumsum(rng.exponential(500.0, size=1000))
    stop = start + rng.normal(0.0, 30.0, size=1000)
    p_start, p_stop = tmp_path / "start.txt", tmp_path / "stop.txt"
    np.savetxt(p_start, start)
    np.savetxt(p_stop, stop)
    delays = read_timestamp_channels(p_start, p_stop)
    np.testing.assert_allclose(delays, stop - start, atol=1e-9)
    hist = histogram_from_delays(delays, gate_ns=10.0)
    assert hist.total == int(np.sum(np.abs(delays) >= 10.0))
    assert hist.to_rows()[0][0] == pytest.approx(hist.bin_centers_ns[0])


def test_probe_counts_and_classical_fidelity():
    rho = np.outer(bell_state("phi+"), bell_state("phi+").conj())
    counts = simulate_probe_counts(rho, DIAGONAL_PROBES, shots=50000, seed=2)
    corr = classical_correlation_matrix(counts)
    assert classical_fidelity(corr, "phi") == pytest.approx(1.0, abs=5e-3)
    assert classical_fidelity(corr, "psi") == pytest.approx(0.0, abs=5e-3)
    with pytest.raises(ValueError):
        classical_correlation_matrix({("x90", "x90"): np.ones(4)})
    with pytest.raises(ValueError):
        classical_fidelity(corr, "ghz")


def test_state_populations_normalized():
    for kind in ("00", "11", "01", "uncorrelated", "phi", "psi"):
        p = state_populations(kind)
        assert p.sum() == pytest.approx(1.0)
