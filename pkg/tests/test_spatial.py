import numpy as np
import pytest

from nvpair.spatial import (ApertureSpec, PsfModel, StraggleModel,
                            absolute_distance, convolve_images,
                            load_image_binary, load_image_csv,
                            load_straggle_table, locate_by_convolution,
                            pair_distance_stats, pair_yield,
                            rayleigh_pair_fraction, rectangle_pair_fraction,
                            sample_landings, save_image_binary,
                            save_image_csv, synth_difference_images)
from nvpair.system import AXIS_111, AXIS_1M1M1, NvOrientation

ORI_A = NvOrientation(AXIS_111, "A")
ORI_B = NvOrientation(AXIS_1M1M1, "B")


def test_model_validation():
    with pytest.raises(ValueError):
        ApertureSpec(width_nm=0.0)
    with pytest.raises(ValueError):
        StraggleModel(sigma_nm=-1.0)
    with pytest.raises(ValueError):
        StraggleModel(definition="rms")
    assert StraggleModel(10.0, "radial").sigma_axis_nm == \
        pytest.approx(10.0 / np.sqrt(2.0))


def test_straggle_only_fraction_matches_rayleigh_oracle():
    straggle = StraggleModel(118.9)
    landings = sample_landings(None, straggle, 200000, seed=6)
    stats = pair_distance_stats(landings, threshold_nm=30.0)
    oracle = rayleigh_pair_fraction(30.0, straggle.sigma_axis_nm)
    assert stats.fraction_below == pytest.approx(oracle, abs=5e-4)


def test_aperture_only_fraction_matches_quadrature_oracle():
    aperture = ApertureSpec(50.0, 40.0)
    landings = sample_landings(aperture, None, 200000, seed=7)
    stats = pair_distance_stats(landings, threshold_nm=30.0)
    oracle = rectangle_pair_fraction(aperture, 30.0)
    assert stats.fraction_below == pytest.approx(oracle, abs=5e-3)


def test_pair_distance_stats_pairings_and_errors():
    pos = np.array([[0.0, 0.0], [3.0, 4.0], [10.0, 0.0], [10.0, 1.0]])
    consecutive = pair_distance_stats(pos, threshold_nm=2.0)
    np.testing.assert_allclose(consecutive.distances_nm, [5.0, 1.0])
    everything = pair_distance_stats(pos, threshold_nm=2.0, pairing="all")
    assert everything.distances_nm.size == 6
    with pytest.raises(ValueError):
        pair_distance_stats(pos, pairing="random")
    with pytest.raises(ValueError):
        pair_distance_stats(pos[:1])


def test_pair_yield_decreases_with_straggle(tmp_path):
    table = tmp_path / "straggle.csv"
    table.write_text("# energy_kev,sigma_nm,depth_nm\n"
                     "energy,sigma,depth\n"
                     "30,20,25\n1000,118.9,500\n")
    rows = load_straggle_table(table)
    assert rows == [(30.0, 20.0, 25.0), (1000.0, 118.9, 500.0)]
    result = pair_yield(rows, ApertureSpec(), n=50000, seed=1)
    assert result[0][1] > result[1][1]
    with pytest.raises(ValueError):
        pair_yield([], ApertureSpec())


def test_localization_noiseless_is_unbiased():
    psf = PsfModel(150.0, 160.0)
    positions = np.array([[-10.9, 0.0], [10.9, 0.0]])
    img_a, img_b = synth_difference_images(positions, psf, n_pixels=129,
                                           pitch_nm=15.0)
    for method in ("fft", "direct"):
        dx, dy = locate_by_convolution(img_a, img_b, 15.0, method=method)
        assert dx == pytest.approx(21.8, abs=1e-6)
        assert dy == pytest.approx(0.0, abs=1e-6)


def test_localization_with_shot_noise_small_bias():
    psf = PsfModel(150.0, 160.0)
    positions = np.array([[-10.9, 0.0], [10.9, 0.0]])
    estimates = []
    for rep in range(20):
        img_a, img_b = synth_difference_images(
            positions, psf, contrasts=(0.8, 0.8), counts_scale=75.0,
            n_pixels=129, pitch_nm=15.0, seed=300 + rep)
        estimates.append(locate_by_convolution(img_a, img_b, 15.0)[0])
    assert np.mean(estimates) == pytest.approx(21.8, abs=2.0)


def test_convolution_input_checks():
    with pytest.raises(ValueError):
        convolve_images(np.zeros((4, 4)), np.zeros((5, 5)))
    with pytest.raises(ValueError):
        convolve_images(np.zeros((4, 4)), np.zeros((4, 4)), method="wavelet")
    with pytest.raises(ValueError):
        locate_by_convolution(np.zeros((8, 8)), np.zeros((8, 8)), 10.0)


def test_absolute_distance_brackets_lateral_measurement():
    lo, hi = absolute_distance(21.8, 4.93e3, ORI_A, ORI_B)
    assert lo <= hi
    assert lo == pytest.approx(21.8, abs=3.0)
    with pytest.raises(ValueError):
        absolute_distance(500.0, 4.93e3, ORI_A, ORI_B)
    with pytest.raises(ValueError):
        absolute_distance(-1.0, 4.93e3, ORI_A, ORI_B)


def test_image_io_round_trips(tmp_path):
    img = np.random.default_rng(0).random((7, 5))
    p_csv = tmp_path / "img.csv"
    save_image_csv(p_csv, img)
    np.testing.assert_allclose(load_image_csv(p_csv), img, atol=1e-12)
    p_bin = tmp_path / "img.nvim"
    save_image_binary(p_bin, img, pitch_nm=15.0)
    back, pitch = load_image_binary(p_bin)
    np.testing.assert_array_equal(back, img)
    assert pitch == 15.0
    p_bad = tmp_path / "bad.nvim"
    p_bad.write_bytes(b"XXXX" + b"\x00" * 16)
    with pytest.raises(ValueError):
        load_image_binary(p_bad)
