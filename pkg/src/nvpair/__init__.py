"""Simulation and analysis toolkit for a dipolar-coupled pair of NV centres.

Subpackage map:

* :mod:`nvpair.linalg` — basis indexing and density-matrix utilities
* :mod:`nvpair.system` — spin Hamiltonians, orientations, dipolar coupling
* :mod:`nvpair.noise` — dephasing models, envelopes, echo modulation
* :mod:`nvpair.sequences` — textual pulse-sequence language
* :mod:`nvpair.engine` — sequence compilation, gates, DEER, Monte Carlo
* :mod:`nvpair.observables` — readout, spectra, tomography, lifetimes
* :mod:`nvpair.nuclear` — nuclear control and entanglement storage
* :mod:`nvpair.photons` — two-photon coincidence statistics
* :mod:`nvpair.spatial` — implantation statistics and localization
* :mod:`nvpair.config` / :mod:`nvpair.cli` — batch runner plumbing
* :mod:`nvpair.validation` — acceptance-check suite
"""

from .config import ExperimentConfig, RunManifest, load_config, write_csv
from .engine import (bell_phi0p, compile_sequence, deer_frequency, deer_signal,
                     evolve_analytic_phi0p, evolve_mc, find_bell_time,
                     fit_deer_frequency, gate_fidelity, ideal_unitary,
                     phi0p_gate_text, pulse_unitary, sq_gate_text,
                     transition_rotation)
from .linalg import (basis_state, check_density_matrix, full_index,
                     pair_index, pair_label, partial_trace, state_fidelity,
                     tensor_product)
from .noise import (EchoSchedule, NoisePreset, decoherence_envelope,
                    envelope_from_schedule, modulation_fid, modulation_hahn)
from .nuclear import (StorageResult, fit_contrast, fit_storage_t1,
                      nuclear_rabi, nuclear_rabi_params, round_trip_efficiency,
                      storage_decay, swap_retrieve, swap_store, swap_unitary,
                      thermal_nuclear_state)
from .observables import (ChargeModel, MeasurementModel, SpectrumPeak,
                          entanglement_lifetime, fft_spectrum, phase_scan,
                          reconstruct_density_matrix,
                          synthesize_tomography_data)
from .photons import (CoincidenceHistogram, EmissionModel, coincidence_prob,
                      gated_coincidence, gated_contrast, infer_weights,
                      simulate_hbt)
from .sequences import (Delay, PulseOp, PulseSequence, SequenceSyntaxError,
                        format_sequence, parse_sequence)
from .spatial import (ApertureSpec, PsfModel, StraggleModel, absolute_distance,
                      locate_by_convolution, pair_distance_stats,
                      rayleigh_pair_fraction, sample_landings,
                      synth_difference_images)
from .system import (FieldConfig, NvOrientation, SpinConstants, SpinSystem,
                     build_pair_hamiltonian, conditional_nuclear_field,
                     dipolar_coupling, level_energies, reference_system)

__version__ = "0.1.0"
