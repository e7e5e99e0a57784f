"""Self-contained acceptance checks covering the full simulation pipeline.

Each check returns a :class:`CheckResult` with a one-line detail string, so
the same functions back both the test suite and the ``validate`` CLI
subcommand.  All checks are deterministic (fixed seeds).
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .engine import (apply_depolarizing, bell_phi0p, compile_sequence,
                     convert_state, deer_signal, evolve_analytic_phi0p,
                     evolve_mc, find_bell_time, fit_deer_frequency,
                     fit_depolarizing_strength, gate_echo_envelope,
                     gate_fidelity, ideal_unitary, phi0p_gate_text,
                     pulse_unitary, sq_gate_text)
from .linalg import basis_state, check_density_matrix, pair_index, state_fidelity
from .noise import (NoisePreset, decoherence_envelope, modulation_fid,
                    modulation_hahn)
from .nuclear import (T1_ELECTRON_S, fit_contrast,
                      fit_storage_t1, nuclear_rabi, nuclear_rabi_exact,
                      nuclear_rabi_params, product_residual,
                      round_trip_efficiency, simulate_storage_decay,
                      swap_store, thermal_nuclear_state)
from .observables import (ChargeModel, MeasurementModel, fft_spectrum,
                          entanglement_lifetime, phase_scan,
                          reconstruct_density_matrix,
                          synthesize_tomography_data)
from .photons import (EmissionModel, coincidence_prob, gated_contrast,
                      infer_weights, simulate_hbt)
from .sequences import PulseOp, format_sequence, parse_sequence
from .spatial import (ApertureSpec, PsfModel, StraggleModel,
                      locate_by_convolution, pair_distance_stats,
                      rayleigh_pair_fraction, sample_landings,
                      synth_difference_images)
from .system import (AXIS_111, FieldConfig, NvOrientation, SpinConstants,
                     conditional_nuclear_field, reference_system)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _result(name: str, passed: bool, detail: str) -> CheckResult:
    return CheckResult(name, bool(passed), detail)


# --------------------------------------------------------------------------
# 1. DEER frequency recovery
# --------------------------------------------------------------------------

def check_deer_frequency_recovery() -> CheckResult:
    system = reference_system()
    preset = NoisePreset(t2_star_s=2.0e-6, t2_s=300.0e-6)
    tau_sq = np.linspace(1.0e-6, 600.0e-6, 600)
    f_sq = fit_deer_frequency(tau_sq, deer_signal(system, preset, tau_sq, "sq"))
    err_sq = abs(f_sq - 4.93e3) / 4.93e3
    tau_dq = np.linspace(0.5e-6, 150.0e-6, 600)
    f_dq = fit_deer_frequency(tau_dq, deer_signal(system, preset, tau_dq, "dq"))
    ratio_err = abs(f_dq / f_sq / 4.0 - 1.0)
    passed = err_sq < 5e-3 and ratio_err < 1e-6
    return _result(
        "deer-frequency-recovery", passed,
        f"SQ fit {f_sq / 1e3:.4f} kHz (rel err {err_sq:.2e} < 5e-3), "
        f"DQ/SQ ratio error {ratio_err:.2e} < 1e-6")


# --------------------------------------------------------------------------
# 2. Ideal Bell-state generation
# --------------------------------------------------------------------------

def check_ideal_bell_gate() -> CheckResult:
    nu = 4.93e3
    system = reference_system(nu)
    tau_star = find_bell_time(nu)
    compiled = compile_sequence(phi0p_gate_text(tau_star), system)
    psi = ideal_unitary(compiled, system) @ basis_state(9, pair_index(0, 0))
    f_sim = state_fidelity(np.outer(psi, psi.conj()), bell_phi0p())
    f_closed = gate_fidelity(tau_star, nu)
    passed = abs(f_sim - 1.0) < 1e-9 and abs(f_closed - f_sim) < 1e-9
    return _result(
        "ideal-bell-gate", passed,
        f"fidelity at tau*={tau_star * 1e6:.3f} us: simulated {f_sim:.12f}, "
        f"closed form off by {abs(f_closed - f_sim):.2e} (< 1e-9)")


# --------------------------------------------------------------------------
# 3. Analytic gate state vs Monte Carlo
# --------------------------------------------------------------------------

def check_analytic_vs_monte_carlo(n_traj: int = 10000) -> CheckResult:
    nu = 4.93e3
    system = reference_system(nu)
    tau_star = 1.0 / (16.0 * nu)
    preset_a = NoisePreset(t2_star_s=5.0e-6, t2_s=60.0e-6,
                           kind="ornstein-uhlenbeck", tau_c_s=10.0e-6,
                           delta_ms_ref=2)
    preset_b = NoisePreset(t2_star_s=5.0e-6, t2_s=150.0e-6,
                           kind="ornstein-uhlenbeck", tau_c_s=10.0e-6,
                           delta_ms_ref=2)
    combos = [(None, None), (preset_a, preset_b), (preset_a, preset_a)]
    worst = 0.0
    for k, tau in enumerate([0.5 * tau_star, tau_star, 1.4 * tau_star]):
        for m, (pa, pb) in enumerate(combos):
            rho_mc = evolve_mc(phi0p_gate_text(tau), system, pa, pb,
                               n_traj, seed=17 + 10 * k + m)
            check_density_matrix(rho_mc)
            l_a = 1.0 if pa is None else gate_echo_envelope(pa, tau)
            l_b = 1.0 if pb is None else gate_echo_envelope(pb, tau)
            rho_an = evolve_analytic_phi0p(tau, nu, l_a, l_b)
            worst = max(worst, float(np.max(np.abs(rho_mc - rho_an))))
    passed = worst < 0.02
    return _result(
        "analytic-vs-monte-carlo", passed,
        f"max entrywise |MC - analytic| over 9 swept cases: {worst:.2e} < 0.02; "
        "trace/Hermiticity/PSD hold on every case")


# --------------------------------------------------------------------------
# 4. Decohered gate fidelity
# --------------------------------------------------------------------------

def check_decohered_gate_fidelity() -> CheckResult:
    nu = 4.93e3
    tau_star = find_bell_time(nu)
    preset_a = NoisePreset(t2_star_s=2.0e-6, t2_s=150.0e-6, delta_ms_ref=2)
    preset_b = NoisePreset(t2_star_s=2.0e-6, t2_s=514.0e-6, delta_ms_ref=2)
    l_a = decoherence_envelope(preset_a, "hahn", 2, 2.0 * tau_star)
    l_b = decoherence_envelope(preset_b, "hahn", 2, 2.0 * tau_star)
    rho = evolve_analytic_phi0p(tau_star, nu, l_a, l_b)
    f_sim = state_fidelity(rho, bell_phi0p())
    f_closed = (1.0 + l_a) * (1.0 + l_b) / 4.0
    in_band = 0.85 <= f_sim <= 0.95 and f_sim >= 0.67
    # calibrated pulse-error channel fitted to the lower measured fidelity
    q = fit_depolarizing_strength(f_sim, 0.67)
    f_dep = state_fidelity(apply_depolarizing(rho, q), bell_phi0p())
    reaches = abs(f_dep - 0.67) <= 0.04
    passed = in_band and abs(f_closed - f_sim) < 1e-9 and reaches
    return _result(
        "decohered-gate-fidelity", passed,
        f"envelopes L=({l_a:.3f}, {l_b:.3f}) give fidelity {f_sim:.4f} in "
        f"[0.85, 0.95]; depolarizing weight {q:.3f} reaches {f_dep:.3f}")


# --------------------------------------------------------------------------
# 5. Collective phase spectroscopy with charge mixing
# --------------------------------------------------------------------------

def check_collective_phase_spectroscopy() -> CheckResult:
    nu = 4.93e3
    system = reference_system(nu)
    tau_star = find_bell_time(nu)
    compiled = compile_sequence(phi0p_gate_text(tau_star), system)
    u_gate = ideal_unitary(compiled, system)
    psi = u_gate @ basis_state(9, pair_index(0, 0))
    rho = convert_state(np.outer(psi, psi.conj()))  # +1/-1 Bell family
    u_conv = pulse_unitary(PulseOp(np.pi, "AB", "0-", np.pi / 2.0), 9)
    probe = (u_conv @ u_gate).conj().T
    model = MeasurementModel()
    charge = ChargeModel(p_minus=0.70)
    t = np.linspace(0.0, 20.0e-6, 1024)
    scan = phase_scan(rho, t, 1.5e6, 1.5e6, model, probe=probe,
                      charge=charge, preselected=True)
    peaks = fft_spectrum(scan.t_s, scan.signal)
    main = max(peaks, key=lambda p: p.amplitude)
    bin_hz = 1.0 / (8.0 * t[-1])
    peak_ok = abs(main.frequency_hz - 6.0e6) <= bin_hz
    scan2 = phase_scan(rho, t, 1.5e6, 1.5e6, model, probe=probe,
                       charge=charge, preselected=False)
    peaks2 = fft_spectrum(scan2.t_s, scan2.signal, min_rel_amplitude=0.1)
    amp6 = max((p.amplitude for p in peaks2
                if abs(p.frequency_hz - 6e6) < 0.5e6), default=0.0)
    amp3 = max((p.amplitude for p in peaks2
                if abs(p.frequency_hz - 3e6) < 0.5e6), default=np.inf)
    ratio = amp6 / amp3
    target = 0.49 / 0.42
    ratio_ok = abs(ratio / target - 1.0) < 0.05
    passed = peak_ok and ratio_ok
    return _result(
        "collective-phase-spectroscopy", passed,
        f"preselected peak at {main.frequency_hz / 1e6:.4f} MHz "
        f"(|err| <= {bin_hz / 1e3:.1f} kHz bin); 6 MHz / 3 MHz amplitude "
        f"ratio {ratio:.4f} vs 0.49/0.42 = {target:.4f} "
        f"({abs(ratio / target - 1) * 100:.2f}% < 5%)")


# --------------------------------------------------------------------------
# 6. Entangled-state lifetimes and the decoherence-free subspace
# --------------------------------------------------------------------------

def check_entanglement_lifetimes() -> CheckResult:
    preset_a = NoisePreset(t2_star_s=27.8e-6, t2_s=1.0, delta_ms_ref=2)
    preset_b = NoisePreset(t2_star_s=22.6e-6, t2_s=1.0, delta_ms_ref=2)
    t_phi = entanglement_lifetime("phi", preset_a, preset_b, seed=1).lifetime_s
    t_psi = entanglement_lifetime("psi", preset_a, preset_b, seed=2).lifetime_s
    ok_phi = abs(t_phi - 28.2e-6) / 28.2e-6 <= 0.15
    ok_psi = abs(t_psi - 23.7e-6) / 23.7e-6 <= 0.15
    t_phi_c = entanglement_lifetime("phi", preset_a, preset_b, correlated=True,
                                    seed=3).lifetime_s
    t_psi_c = entanglement_lifetime("psi", preset_a, preset_b, correlated=True,
                                    t_max_s=500.0e-6, seed=4).lifetime_s
    ratio = t_psi_c / t_phi_c
    passed = ok_phi and ok_psi and ratio >= 10.0
    return _result(
        "entanglement-lifetimes", passed,
        f"independent noise: T(Phi) {t_phi * 1e6:.2f} us (target 28.2 +-15%), "
        f"T(Psi) {t_psi * 1e6:.2f} us (target 23.7 +-15%); correlated noise "
        f"T(Psi)/T(Phi) = {ratio:.1f} >= 10")


# --------------------------------------------------------------------------
# 7. Tomography closed loop
# --------------------------------------------------------------------------

def check_tomography_closed_loop() -> CheckResult:
    pp = pair_index(1, 1)
    mm = pair_index(-1, -1)
    psi = (basis_state(9, pp) + basis_state(9, mm)) / np.sqrt(2.0)
    rho = np.outer(psi, psi.conj())
    data = synthesize_tomography_data(rho, l_second=0.9)
    recon = reconstruct_density_matrix(data)
    fid = state_fidelity(recon, psi)
    member = frozenset({(min(pp, mm), max(pp, mm))})
    worst = 0.0
    for (i, j), meas in {**data["pair"], **data["local"]}.items():
        if (i, j) not in member:
            worst = max(worst, abs(meas) / (0.5 * data["l_second"]))
    passed = abs(fid - 1.0) <= 0.01 and worst < 0.02
    return _result(
        "tomography-closed-loop", passed,
        f"reconstruction fidelity {fid:.6f} (1.00 +- 0.01); largest "
        f"non-member probe amplitude {worst:.2e} < 0.02")


# --------------------------------------------------------------------------
# 8. Conditional nuclear Rabi control
# --------------------------------------------------------------------------

def check_nuclear_control() -> CheckResult:
    worst = 0.0
    for b in (10.0, 20.0, 40.0, 60.0):
        for theta_deg in (5.0, 30.0, 54.5, 90.0, 120.0, 170.0):
            theta = np.deg2rad(theta_deg)
            omega = nuclear_rabi_params(b, theta).omega_hz
            for t in np.linspace(0.0, 3.0 / omega, 13):
                closed = nuclear_rabi(b, theta, t_s=float(t))
                exact = nuclear_rabi_exact(b, theta, t_s=float(t))
                worst = max(worst, abs(closed - exact))
    contrast = nuclear_rabi_params(40.0, np.pi / 2.0).contrast
    passed = worst < 1e-10 and abs(contrast - 1.0) < 1e-12
    return _result(
        "nuclear-control", passed,
        f"closed form vs exact propagator: max |delta| {worst:.2e} < 1e-10 "
        f"over a (B, theta, t) grid; theta = pi/2 contrast = {contrast:.12f}")


# --------------------------------------------------------------------------
# 9. Electron-to-nuclear swap pipeline
# --------------------------------------------------------------------------

def check_swap_pipeline() -> CheckResult:
    psi = (basis_state(9, pair_index(1, 1))
           + basis_state(9, pair_index(-1, -1))) / np.sqrt(2.0)
    rho36 = thermal_nuclear_state(np.outer(psi, psi.conj()))
    eff = round_trip_efficiency(rho36)
    residual = product_residual(swap_store(rho36).rho)
    t = np.linspace(0.0, 3.0e-3, 25)
    decay = simulate_storage_decay(1.0, t, n_traj=200000, seed=5)
    t1_fit, _ = fit_storage_t1(t, decay)
    t1_ok = abs(t1_fit - T1_ELECTRON_S) / T1_ELECTRON_S <= 0.10
    c = fit_contrast(0.41, rho36)
    eff_c = round_trip_efficiency(rho36, c)
    passed = (abs(eff - 1.0) < 1e-9 and residual < 1e-9 and t1_ok
              and abs(eff_c - 0.41) < 1e-6)
    return _result(
        "swap-pipeline", passed,
        f"ideal round trip {eff:.12f}, product residual {residual:.1e} < 1e-9; "
        f"T1 fit {t1_fit * 1e3:.3f} ms (input {T1_ELECTRON_S * 1e3:.2f}, "
        f"within 10%); contrast {c:.4f} reaches round trip {eff_c:.4f}")


# --------------------------------------------------------------------------
# 10. Photon coincidence statistics
# --------------------------------------------------------------------------

def check_photon_statistics() -> CheckResult:
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        k1 = rng.uniform(0.01, 0.5)
        model = EmissionModel(k1 + rng.uniform(0.01, 0.5), k1)
        alpha_sq = rng.uniform(0.0, 1.0)
        s = (alpha_sq * coincidence_prob("phi", model)
             + (1.0 - alpha_sq) * coincidence_prob("psi", model))
        w = infer_weights(s, model)
        worst = max(worst, abs(w.alpha_sq - alpha_sq),
                    abs(w.alpha_sq + w.beta_sq - 1.0))
    model = EmissionModel(0.4, 0.2)
    shots = 1_000_000
    rates, sig = {}, {}
    for k, kind in enumerate(("phi", "uncorrelated", "psi")):
        h = simulate_hbt(kind, model, shots, seed=40 + k)
        rates[kind] = h.rate
        sig[kind] = np.sqrt(max(h.total, 1)) / shots
    z_hi = (rates["phi"] - rates["uncorrelated"]) / np.hypot(sig["phi"],
                                                             sig["uncorrelated"])
    z_lo = (rates["uncorrelated"] - rates["psi"]) / np.hypot(sig["psi"],
                                                             sig["uncorrelated"])
    c0 = gated_contrast(model, 0.0)
    c1 = gated_contrast(model, 12.7)
    passed = worst < 1e-12 and z_hi >= 3.0 and z_lo >= 3.0 and c1 > c0
    return _result(
        "photon-statistics", passed,
        f"weight inversion round trip max err {worst:.1e} < 1e-12 over 1000 "
        f"cases; HBT ordering Phi > uncorrelated > Psi at {z_hi:.1f} / "
        f"{z_lo:.1f} sigma; gating at 12.7 ns raises contrast "
        f"{c0:.3f} -> {c1:.3f}")


# --------------------------------------------------------------------------
# 11. Implantation pair statistics
# --------------------------------------------------------------------------

def check_implantation_statistics() -> CheckResult:
    n = 100000
    straggle = StraggleModel()
    pure = pair_distance_stats(sample_landings(None, straggle, n, seed=6))
    oracle = rayleigh_pair_fraction(30.0, straggle.sigma_axis_nm)
    n_pairs = n // 2
    sigma = np.sqrt(oracle * (1.0 - oracle) / n_pairs)
    pull = (pure.fraction_below - oracle) / sigma
    full = pair_distance_stats(
        sample_landings(ApertureSpec(), straggle, n, seed=7)).fraction_below
    passed = abs(pull) <= 3.0 and 0.010 <= full <= 0.035
    return _result(
        "implantation-statistics", passed,
        f"pure-straggle MC fraction {pure.fraction_below:.4f} vs Rayleigh "
        f"{oracle:.4f} (pull {pull:+.2f} sigma); full model "
        f"{full * 100:.2f}% in [1.0%, 3.5%]")


# --------------------------------------------------------------------------
# 12. Super-resolution localization
# --------------------------------------------------------------------------

def check_localization() -> CheckResult:
    psf = PsfModel(150.0, 160.0)
    positions = np.array([[-10.9, 0.0], [10.9, 0.0]])
    kwargs = dict(n_pixels=129, pitch_nm=15.0)
    img_a, img_b = synth_difference_images(positions, psf, **kwargs)
    clean = locate_by_convolution(img_a, img_b, 15.0)
    clean_bias = abs(np.linalg.norm(clean) - 21.8)
    seps = []
    for rep in range(42):
        img_a, img_b = synth_difference_images(
            positions, psf, contrasts=(0.8, 0.8), counts_scale=75.0,
            seed=100 + rep, **kwargs)
        seps.append(np.linalg.norm(locate_by_convolution(img_a, img_b, 15.0)))
    bias = float(np.mean(seps)) - 21.8
    std = float(np.std(seps, ddof=1))
    passed = clean_bias < 0.1 and abs(bias) <= 1.7 and 0.8 <= std <= 3.4
    return _result(
        "localization", passed,
        f"noiseless bias {clean_bias:.2e} nm < 0.1; 42 noisy repetitions: "
        f"bias {bias:+.2f} nm (|bias| <= 1.7), stddev {std:.2f} nm in "
        f"[0.8, 3.4]")


# --------------------------------------------------------------------------
# 13. Hyperfine echo modulation structure
# --------------------------------------------------------------------------

def check_echo_modulation() -> CheckResult:
    orientation = NvOrientation(AXIS_111, "A")
    field = FieldConfig.from_polar(32.0, orientation, polar_deg=0.0)
    constants = SpinConstants()
    h_plus = conditional_nuclear_field(1, orientation, field, constants)
    h_minus = conditional_nuclear_field(-1, orientation, field, constants)
    h_zero = conditional_nuclear_field(0, orientation, field, constants)
    a_n = constants.a_n_hz
    worst_hahn = 0.0
    worst_fid = 0.0
    for t in np.linspace(1e-8, 4e-6, 41):
        worst_hahn = max(worst_hahn,
                         abs(modulation_hahn(h_plus, h_minus, float(t)) - 1.0))
        worst_fid = max(worst_fid,
                        abs(modulation_fid(h_zero, h_plus, float(t))
                            - np.cos(np.pi * a_n * t)))
    passed = worst_hahn < 1e-9 and worst_fid < 1e-9
    return _result(
        "echo-modulation", passed,
        f"aligned-field DQ Hahn modulation deviates from 1 by {worst_hahn:.1e} "
        f"< 1e-9; FID modulation matches the half-hyperfine cosine to "
        f"{worst_fid:.1e} < 1e-9")


# --------------------------------------------------------------------------
# 14. Parser round trip and run determinism
# --------------------------------------------------------------------------

_CORPUS_EXTRA = """\
pi A 0+ phase=y if mI=+1/2@A
pi A 0- phase=y if mI=-1/2@A
pi B 0+ phase=y if mI=+1/2@B
pi B 0- phase=y if mI=-1/2@B
wait 2.5us
rot(0.7853981633974483rad) AB dq phase=1.0471975511965976rad
pi AB 0- if mS=0@A
wait 350.0ns
pi/2 B 0+ phase=x
wait 1.12ms
"""


def check_parser_and_determinism() -> CheckResult:
    corpus = [phi0p_gate_text(12.68e-6), sq_gate_text(50.7e-6), _CORPUS_EXTRA]
    for text in corpus:
        once = format_sequence(parse_sequence(text))
        twice = format_sequence(parse_sequence(once))
        if once != twice:
            return _result("parser-and-determinism", False,
                           "parse/print round trip is not idempotent")

    def render() -> bytes:
        from .config import format_csv
        system = reference_system()
        tau = np.linspace(1.0e-6, 400.0e-6, 200)
        rho = evolve_mc(phi0p_gate_text(1.0 / (16.0 * system.coupling_hz)),
                        system, NoisePreset(5e-6, 60e-6, delta_ms_ref=2),
                        None, 500, seed=9)
        rows = [(float(t), float(s)) for t, s in
                zip(tau, deer_signal(system, None, tau, "sq"))]
        rows.append((float(np.real(rho[0, 0])), float(np.real(rho[4, 4]))))
        buf = io.StringIO()
        format_csv(buf, ("a", "b"), rows)
        return buf.getvalue().encode()

    deterministic = render() == render()
    passed = deterministic
    return _result(
        "parser-and-determinism", passed,
        "parse/print round trip idempotent on the full sequence corpus; "
        "identical (config, seed) renders byte-identical CSV output: "
        f"{deterministic}")


ALL_CHECKS: tuple[tuple[str, Callable[[], CheckResult]], ...] = (
    ("criterion-01", check_deer_frequency_recovery),
    ("criterion-02", check_ideal_bell_gate),
    ("criterion-03", check_analytic_vs_monte_carlo),
    ("criterion-04", check_decohered_gate_fidelity),
    ("criterion-05", check_collective_phase_spectroscopy),
    ("criterion-06", check_entanglement_lifetimes),
    ("criterion-07", check_tomography_closed_loop),
    ("criterion-08", check_nuclear_control),
    ("criterion-09", check_swap_pipeline),
    ("criterion-10", check_photon_statistics),
    ("criterion-11", check_implantation_statistics),
    ("criterion-12", check_localization),
    ("criterion-13", check_echo_modulation),
    ("criterion-14", check_parser_and_determinism),
)


def run_all(report: Callable[[str], None] | None = None,
            threads: int = 1) -> list[tuple[str, CheckResult]]:
    """Run every acceptance check, optionally in a thread pool."""
    results: dict[str, CheckResult] = {}
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {label: pool.submit(fn) for label, fn in ALL_CHECKS}
        results = {label: fut.result() for label, fut in futures.items()}
    else:
        for label, fn in ALL_CHECKS:
            results[label] = fn()
    out = []
    for label, _fn in ALL_CHECKS:
        res = results[label]
        if report is not None:
            status = "PASS" if res.passed else "FAIL"
            report(f"{label} {status} {res.name}: {res.detail}")
        out.append((label, res))
    return out
