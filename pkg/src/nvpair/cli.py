"""Command-line batch runner wiring the simulation modules together.

Every subcommand reads an optional JSON config, writes CSV/JSON artifacts
plus a ``manifest.json`` into the output directory, and is byte-reproducible
for a fixed (config, seed).  Exit codes: 0 success, 1 test/check failure,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import (ConfigError, ExperimentConfig, PACKAGE_VERSION,
                     RunManifest, CONFIG_SCHEMA, load_config, write_csv)
from .engine import (bell_phi0p, compile_sequence, deer_frequency,
                     deer_signal, find_bell_time, fit_deer_frequency,
                     gate_fidelity, ideal_unitary, phi0p_gate_text,
                     sq_gate_text)
from .linalg import basis_state, pair_index, state_fidelity
from .noise import NoisePreset
from .observables import entanglement_lifetime, reconstruct_density_matrix, \
    synthesize_tomography_data
from .photons import coincidence_prob, gated_coincidence, gated_contrast, \
    simulate_hbt
from .nuclear import (NUCLEAR_T2STAR_S, T1_ELECTRON_S, fit_storage_t1,
                      nuclear_rabi_params, round_trip_efficiency,
                      simulate_storage_decay, swap_store,
                      thermal_nuclear_state)
from .spatial import (ApertureSpec, PsfModel, StraggleModel,
                      load_straggle_table, locate_by_convolution,
                      pair_distance_stats, pair_yield, rayleigh_pair_fraction,
                      sample_landings, synth_difference_images)
from .system import level_energies

THREADS_ENV_VAR = "NVPAIR_THREADS"

_DESCRIPTIONS = {
    "odmr": "Optically detected magnetic resonance spectrum of the two "
            "defects: Lorentzian dips at each electron transition, split by "
            "the intrinsic nitrogen-15 hyperfine coupling.",
    "deer": "Double electron-electron resonance: echo-detected oscillation "
            "at the dipolar coupling frequency, fitted back out of the "
            "synthetic trace (the double-quantum variant runs 4x faster).",
    "entangle": "Fidelity and populations of the echoed entangling gate "
                "versus the free-evolution time, locating the Bell time.",
    "tomography": "Synthetic pair-coherence probe set for the ideal "
                  "double-quantum Bell state and its linear-inversion "
                  "reconstruction.",
    "lifetime": "Monte Carlo dephasing of the Phi and Psi Bell families "
                "under independent and shared (common-mode) noise; the "
                "Psi family under shared noise is a decoherence-free "
                "subspace.",
    "swap": "Storage of electron entanglement in the intrinsic nuclear "
            "spins: round-trip efficiency, storage-interval decay, and the "
            "electron-T1 fit of the decay curve.",
    "photon-corr": "Spin-dependent two-photon coincidence statistics with "
                   "start-stop histograms and zero-delay gating.",
    "implant": "Molecular-ion implantation statistics: pair-distance "
               "distribution under aperture plus lateral straggle, against "
               "the closed-form Rayleigh oracle.",
    "localize": "Super-resolution localization of the two emitters from "
                "difference-image cross-correlation at a fixed injected "
                "separation.",
    "validate": "Runs the full acceptance-check suite and reports one "
                "pass/fail line per criterion.",
}

_COMMANDS = tuple(_DESCRIPTIONS)


def _resolve_threads(args, config: ExperimentConfig) -> int:
    env = os.environ.get(THREADS_ENV_VAR)
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("config_invalid",
                              f"{THREADS_ENV_VAR} must be an integer, got {env!r}")
    if args.threads is not None:
        return max(1, args.threads)
    return config.threads


def _write_json(path: Path, payload: dict) -> Path:
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


class _Run:
    """Shared per-command context: config, seed, output dir, manifest."""

    def __init__(self, command: str, args):
        self.config = load_config(args.config)
        self.seed = args.seed if args.seed is not None else self.config.seed
        self.trajectories = (args.trajectories if args.trajectories is not None
                             else self.config.trajectories)
        self.threads = _resolve_threads(args, self.config)
        self.out_dir = Path(args.out if args.out is not None
                            else self.config.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(command, self.config.sha256, self.seed)

    def csv(self, name: str, header, rows) -> Path:
        p = write_csv(self.out_dir / name, header, rows)
        self.manifest.add(p)
        return p

    def json(self, name: str, payload: dict) -> Path:
        p = _write_json(self.out_dir / name, payload)
        self.manifest.add(p)
        return p

    def finish(self) -> None:
        self.manifest.write(self.out_dir)


# --------------------------------------------------------------------------
# Subcommand implementations
# --------------------------------------------------------------------------

def _cmd_odmr(args) -> int:
    run = _Run("odmr", args)
    sec = run.config.section("odmr")
    system = run.config.system()
    constants = system.constants
    lines = []
    for label, orientation in (("A", system.orientation_a),
                               ("B", system.orientation_b)):
        energies = level_energies(orientation, system.field, constants)
        for ms in (1, -1):
            f0 = abs(energies[ms] - energies[0])
            for sign in (+0.5, -0.5):
                lines.append((label, ms, f0 + sign * constants.a_n_hz))
    freqs = np.array([f for _, _, f in lines])
    f_min = sec.get("f_min_hz", freqs.min() - 20e6)
    f_max = sec.get("f_max_hz", freqs.max() + 20e6)
    n = sec.get("n_points", 2001)
    width = sec.get("linewidth_hz", 0.4e6)
    contrast = sec.get("contrast", 0.04)
    grid = np.linspace(f_min, f_max, n)
    signal = np.ones_like(grid)
    for _, _, f in lines:
        signal -= contrast / (1.0 + ((grid - f) / (width / 2.0)) ** 2)
    run.csv("odmr.csv", ("frequency_hz", "signal"),
            [(float(f), float(s)) for f, s in zip(grid, signal)])
    run.json("odmr.json", {
        "lines": [{"defect": d, "ms": ms, "frequency_hz": float(f)}
                  for d, ms, f in lines],
        "linewidth_hz": float(width),
    })
    run.finish()
    return 0


def _cmd_deer(args) -> int:
    run = _Run("deer", args)
    sec = run.config.section("deer")
    system = run.config.system()
    mode = sec.get("mode", "sq")
    f_expect = deer_frequency(system, mode)
    tau_max = sec.get("tau_max_s", 3.0 / f_expect)
    n = sec.get("n_points", 600)
    tau = np.linspace(tau_max / n, tau_max, n)
    signal = deer_signal(system, run.config.noise("a"), tau, mode)
    f_fit = fit_deer_frequency(tau, signal)
    run.csv("deer.csv", ("tau_s", "signal"),
            [(float(t), float(s)) for t, s in zip(tau, signal)])
    run.json("deer_fit.json", {
        "mode": mode,
        "fitted_frequency_hz": float(f_fit),
        "expected_frequency_hz": float(f_expect),
        "relative_error": float(abs(f_fit - f_expect) / f_expect),
    })
    run.finish()
    return 0


def _cmd_entangle(args) -> int:
    run = _Run("entangle", args)
    sec = run.config.section("entangle")
    system = run.config.system()
    nu = system.coupling_hz
    gate = sec.get("gate", "dq")
    builder = phi0p_gate_text if gate == "dq" else sq_gate_text
    period = 1.0 / (4.0 * nu) if gate == "dq" else 1.0 / (2.0 * nu)
    n = sec.get("n_points", 257)
    taus = np.linspace(0.0, period, n)
    start = basis_state(9, pair_index(0, 0))
    target = bell_phi0p()
    rows = []
    for tau in taus:
        compiled = compile_sequence(builder(float(tau)), system)
        psi = ideal_unitary(compiled, system) @ start
        rho = np.outer(psi, psi.conj())
        fid = state_fidelity(rho, target) if gate == "dq" else float(
            2.0 * abs(psi[pair_index(0, 0)]) * abs(psi[pair_index(1, 1)]))
        rows.append((float(tau), float(fid),
                     float(np.real(rho[pair_index(0, 0), pair_index(0, 0)])),
                     float(np.real(rho[pair_index(1, 1), pair_index(1, 1)]))))
    run.csv("entangle.csv", ("tau_s", "fidelity", "p00", "p_plus_plus"), rows)
    tau_star = find_bell_time(nu, gate)
    run.json("entangle.json", {
        "gate": gate,
        "bell_time_s": float(tau_star),
        "fidelity_at_bell_time": float(gate_fidelity(tau_star, nu))
        if gate == "dq" else max(r[1] for r in rows),
    })
    run.finish()
    return 0


def _cmd_tomography(args) -> int:
    run = _Run("tomography", args)
    sec = run.config.section("tomography")
    pp, mm = pair_index(1, 1), pair_index(-1, -1)
    psi = (basis_state(9, pp) + basis_state(9, mm)) / np.sqrt(2.0)
    rho = np.outer(psi, psi.conj())
    data = synthesize_tomography_data(rho, l_second=sec.get("l_second", 0.9),
                                      sigma=sec.get("sigma", 0.0),
                                      seed=run.seed)
    recon = reconstruct_density_matrix(data)
    rows = [(i, j, float(np.real(recon[i, j])), float(np.imag(recon[i, j])))
            for i in range(9) for j in range(9)]
    run.csv("tomography_rho.csv", ("row", "col", "re", "im"), rows)
    run.json("tomography.json", {
        "fidelity": float(state_fidelity(recon, psi)),
        "l_second": float(data["l_second"]),
    })
    run.finish()
    return 0


def _cmd_lifetime(args) -> int:
    run = _Run("lifetime", args)
    sec = run.config.section("lifetime")
    preset_a = run.config.noise("a") or NoisePreset(27.8e-6, 1.0, delta_ms_ref=2)
    preset_b = run.config.noise("b") or NoisePreset(22.6e-6, 1.0, delta_ms_ref=2)
    t_max = sec.get("t_max_s", 80.0e-6)
    t_max_corr = sec.get("correlated_t_max_s", 500.0e-6)
    carrier = sec.get("carrier_hz", 6.0e6)
    cases = [("phi", False, t_max, run.seed + 1),
             ("psi", False, t_max, run.seed + 2),
             ("phi", True, t_max, run.seed + 3),
             ("psi", True, t_max_corr, run.seed + 4)]

    def one(case):
        kind, corr, tm, seed = case
        return entanglement_lifetime(kind, preset_a, preset_b, correlated=corr,
                                     carrier_hz=carrier, t_max_s=tm,
                                     n_traj=run.trajectories, seed=seed)

    if run.threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=run.threads) as pool:
            results = list(pool.map(one, cases))
    else:
        results = [one(c) for c in cases]
    summary = []
    for (kind, corr, _tm, _seed), res in zip(cases, results):
        tag = f"{kind}_{'correlated' if corr else 'independent'}"
        run.csv(f"lifetime_{tag}.csv", ("t_s", "signal"),
                [(float(t), float(s)) for t, s in zip(res.t_s, res.signal)])
        summary.append({"state": kind, "correlated": corr,
                        "lifetime_s": float(res.lifetime_s)})
    run.json("lifetime.json", {"carrier_hz": float(carrier),
                               "lifetimes": summary})
    run.finish()
    return 0


def _cmd_swap(args) -> int:
    run = _Run("swap", args)
    sec = run.config.section("swap")
    t1 = sec.get("t1_s", T1_ELECTRON_S)
    t2n = sec.get("nuclear_t2star_s", NUCLEAR_T2STAR_S)
    contrast = sec.get("pulse_contrast", 1.0)
    psi = (basis_state(9, pair_index(1, 1))
           + basis_state(9, pair_index(-1, -1))) / np.sqrt(2.0)
    rho36 = thermal_nuclear_state(np.outer(psi, psi.conj()))
    stored = swap_store(rho36, contrast)
    eff_round = round_trip_efficiency(rho36, contrast)
    t_max = sec.get("t_max_s", 4.0e-3)
    n = sec.get("n_points", 33)
    t = np.linspace(0.0, t_max, n)
    decay = simulate_storage_decay(eff_round, t, t1_s=t1, nuclear_t2star_s=t2n,
                                   n_traj=max(run.trajectories, 20000),
                                   seed=run.seed)
    t1_fit, eff0_fit = fit_storage_t1(t, decay, nuclear_t2star_s=t2n)
    rabi = nuclear_rabi_params(sec.get("b_gauss", 40.0),
                               np.deg2rad(sec.get("angle_deg", 54.5)))
    run.csv("swap_decay.csv", ("t_s", "efficiency"),
            [(float(tt), float(e)) for tt, e in zip(t, decay)])
    run.json("swap.json", {
        "pulse_contrast": float(contrast),
        "store_efficiency": float(stored.efficiency),
        "round_trip_efficiency": float(eff_round),
        "t1_fit_s": float(t1_fit),
        "efficiency0_fit": float(eff0_fit),
        "nuclear_rabi_hz": float(rabi.omega_hz),
        "nuclear_rabi_contrast": float(rabi.contrast),
    })
    run.finish()
    return 0


def _cmd_photon_corr(args) -> int:
    run = _Run("photon-corr", args)
    sec = run.config.section("photon_corr")
    model = run.config.emission()
    shots = sec.get("shots", 1_000_000)
    gate = sec.get("gate_ns", 12.7)
    bin_width = sec.get("bin_width_ns", 2.0)
    probs = {kind: float(coincidence_prob(kind, model))
             for kind in ("00", "11", "01", "uncorrelated", "phi", "psi")}
    for k, kind in enumerate(("phi", "uncorrelated", "psi")):
        for g, tag in ((0.0, "ungated"), (gate, "gated")):
            h = simulate_hbt(kind, model, shots, gate_ns=g,
                             seed=run.seed + k, bin_width_ns=bin_width)
            run.csv(f"hbt_{kind}_{tag}.csv", ("delay_ns", "counts"),
                    h.to_rows())
    run.json("photon_corr.json", {
        "coincidence_probabilities": probs,
        "gate_ns": float(gate),
        "contrast_ungated": float(gated_contrast(model, 0.0)),
        "contrast_gated": float(gated_contrast(model, gate)),
        "expected_rate_phi_gated": float(gated_coincidence("phi", model, gate)),
    })
    run.finish()
    return 0


def _cmd_implant(args) -> int:
    run = _Run("implant", args)
    sec = run.config.section("implant")
    n = sec.get("n_ions", 100000)
    threshold = sec.get("threshold_nm", 30.0)
    aperture = ApertureSpec(sec.get("aperture_width_nm", 50.0),
                            sec.get("aperture_height_nm", 40.0))
    straggle = StraggleModel(sec.get("straggle_nm", 118.9))
    landings = sample_landings(aperture, straggle, n, seed=run.seed)
    stats = pair_distance_stats(landings, threshold)
    edges = np.linspace(0.0, 6.0 * straggle.sigma_axis_nm, 121)
    hist, _ = np.histogram(stats.distances_nm, bins=edges)
    run.csv("implant_distances.csv", ("distance_nm", "count"),
            [(float(0.5 * (a + b)), int(c))
             for a, b, c in zip(edges[:-1], edges[1:], hist)])
    payload = {
        "n_ions": int(n),
        "threshold_nm": float(threshold),
        "pair_fraction": float(stats.fraction_below),
        "rayleigh_oracle": float(
            rayleigh_pair_fraction(threshold, straggle.sigma_axis_nm)),
    }
    table_path = sec.get("straggle_table")
    if table_path:
        table = load_straggle_table(table_path)
        yields = pair_yield(table, aperture, threshold, n=n, seed=run.seed)
        run.csv("implant_yield.csv", ("energy_kev", "pair_fraction"),
                [(float(e), float(y)) for e, y in yields])
    run.json("implant.json", payload)
    run.finish()
    return 0


def _cmd_localize(args) -> int:
    run = _Run("localize", args)
    sec = run.config.section("localize")
    sep = sec.get("separation_nm", 21.8)
    reps = sec.get("repetitions", 42)
    psf = PsfModel(sec.get("psf_sigma_x_nm", 150.0),
                   sec.get("psf_sigma_y_nm", 160.0))
    kwargs = dict(n_pixels=sec.get("n_pixels", 129),
                  pitch_nm=sec.get("pitch_nm", 15.0))
    contrasts = (sec.get("contrast_a", 0.8), sec.get("contrast_b", 0.8))
    counts = sec.get("counts_scale", 75.0)
    positions = np.array([[-sep / 2.0, 0.0], [sep / 2.0, 0.0]])
    rows = []
    for rep in range(reps):
        img_a, img_b = synth_difference_images(
            positions, psf, contrasts=contrasts, counts_scale=counts,
            seed=run.seed + rep, **kwargs)
        d = locate_by_convolution(img_a, img_b, kwargs["pitch_nm"])
        rows.append((rep, float(d[0]), float(d[1]),
                     float(np.linalg.norm(d))))
    run.csv("localize.csv", ("rep", "dx_nm", "dy_nm", "separation_nm"), rows)
    seps = np.array([r[3] for r in rows])
    run.json("localize.json", {
        "injected_separation_nm": float(sep),
        "mean_separation_nm": float(seps.mean()),
        "bias_nm": float(seps.mean() - sep),
        "stddev_nm": float(seps.std(ddof=1)) if reps > 1 else 0.0,
        "repetitions": int(reps),
    })
    run.finish()
    return 0


def _cmd_validate(args) -> int:
    from .validation import run_all
    run = _Run("validate", args)
    results = run_all(report=print, threads=run.threads)
    payload = {label: {"name": r.name, "passed": r.passed, "detail": r.detail}
               for label, r in results}
    run.json("validate.json", payload)
    run.finish()
    return 0 if all(r.passed for _, r in results) else 1


def _cmd_describe(args) -> int:
    name = args.subcommand
    if name not in _COMMANDS:
        print(json.dumps({"code": "unknown_subcommand",
                          "message": f"unknown subcommand {name!r}; valid: "
                                     + ", ".join(_COMMANDS)}),
              file=sys.stderr)
        return 2
    key = name.replace("-", "_")
    schema = {
        k: v for k, v in CONFIG_SCHEMA["properties"].items()
        if k in ("system", "noise", "measurement", "emission", "seed",
                 "out_dir", "trajectories", "threads", key)
    }
    print(f"{name}: {_DESCRIPTIONS[name]}")
    print()
    print("Config schema (relevant sections):")
    print(json.dumps(schema, indent=2, sort_keys=True))
    return 0


_HANDLERS = {
    "odmr": _cmd_odmr,
    "deer": _cmd_deer,
    "entangle": _cmd_entangle,
    "tomography": _cmd_tomography,
    "lifetime": _cmd_lifetime,
    "swap": _cmd_swap,
    "photon-corr": _cmd_photon_corr,
    "implant": _cmd_implant,
    "localize": _cmd_localize,
    "validate": _cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nvpair",
        description="Simulation toolkit for a dipolar-coupled pair of "
                    "optically addressed defect spins.")
    parser.add_argument("--version", action="version", version=PACKAGE_VERSION)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="JSON experiment configuration")
    common.add_argument("--seed", type=int, metavar="N",
                        help="master seed (overrides the config)")
    common.add_argument("--out", metavar="DIR",
                        help="output directory (overrides the config)")
    common.add_argument("--trajectories", type=int, metavar="N",
                        help="Monte Carlo trajectory count")
    common.add_argument("--threads", type=int, metavar="N",
                        help=f"worker threads (env {THREADS_ENV_VAR} wins)")
    for name in _HANDLERS:
        sub.add_parser(name, parents=[common], help=_DESCRIPTIONS[name],
                       description=_DESCRIPTIONS[name])
    desc = sub.add_parser("describe",
                          help="print a subcommand's config schema and the "
                               "experiment it reproduces")
    desc.add_argument("subcommand")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help
        return int(exc.code or 0)
    if args.command == "describe":
        return _cmd_describe(args)
    try:
        return _HANDLERS[args.command](args)
    except ConfigError as exc:
        print(exc.to_json(), file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(json.dumps({"code": "runtime_error", "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
