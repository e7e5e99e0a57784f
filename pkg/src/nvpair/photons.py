"""Two-photon coincidence statistics for the defect pair.

The two defects emit with spin-dependent probabilities (``k0`` for mS=0,
``k1`` for mS=+-1) and spin-dependent excited-state lifetimes.  Coincidence
rates therefore separate population-correlated states from uncorrelated ones:
a Phi-type state (populations on |00> and |11>) produces more double emissions
than an uncorrelated mixture, and a Psi-type state fewer.  Inverting the
measured coincidence level yields the Phi/Psi family weights of an unknown
state.  A start-stop (HBT) simulation with a zero-delay gate reproduces the
lifetime-based contrast enhancement.

Only the {mS=0, mS=+1} qubit subspace of each defect enters here; basis order
for two-defect quantities is (00, 01, 10, 11).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import tensor_product

TAU_BRIGHT_S = 23e-9
TAU_DARK_S = 12.7e-9

STATE_KINDS = ("00", "11", "01", "uncorrelated", "phi", "psi")

_RATE_TOL = 1e-12


@dataclass(frozen=True)
class EmissionModel:
    """Spin-dependent emission probabilities and excited-state lifetimes."""

    k0: float
    k1: float
    tau_bright_s: float = TAU_BRIGHT_S
    tau_dark_s: float = TAU_DARK_S

    def __post_init__(self):
        if not self.k0 > self.k1 > 0:
            raise ValueError("emission probabilities must satisfy k0 > k1 > 0")
        if self.tau_bright_s <= 0 or self.tau_dark_s <= 0:
            raise ValueError("lifetimes must be positive")

    def emission(self, spin: int) -> float:
        return self.k0 if spin == 0 else self.k1

    def lifetime_s(self, spin: int) -> float:
        return self.tau_bright_s if spin == 0 else self.tau_dark_s


def state_populations(kind: str) -> np.ndarray:
    """Diagonal populations of the named state in the (00,01,10,11) basis."""
    if kind == "00":
        return np.array([1.0, 0.0, 0.0, 0.0])
    if kind == "11":
        return np.array([0.0, 0.0, 0.0, 1.0])
    if kind == "01":
        return np.array([0.0, 1.0, 0.0, 0.0])
    if kind == "uncorrelated":
        return np.full(4, 0.25)
    if kind in ("phi", "phi+", "phi-"):
        return np.array([0.5, 0.0, 0.0, 0.5])
    if kind in ("psi", "psi+", "psi-"):
        return np.array([0.0, 0.5, 0.5, 0.0])
    raise ValueError(f"unknown state kind {kind!r}")


def coincidence_prob(kind: str, model: EmissionModel) -> float:
    """Two-photon emission probability relative to single-photon events."""
    k0, k1 = model.k0, model.k1
    if kind == "00":
        return k0 / 2.0
    if kind == "11":
        return k1 / 2.0
    if kind in ("01", "10"):
        return k0 * k1 / (k0 + k1)
    if kind == "uncorrelated":
        return (k0 + k1) / 4.0
    if kind in ("phi", "phi+", "phi-"):
        return (k0 ** 2 + k1 ** 2) / (2.0 * (k0 + k1))
    if kind in ("psi", "psi+", "psi-"):
        return k0 * k1 / (k0 + k1)
    raise ValueError(f"unknown state kind {kind!r}")


@dataclass(frozen=True)
class StateWeights:
    """Phi-family and Psi-family weights of a two-defect state."""

    alpha_sq: float
    beta_sq: float


def infer_weights(s: float, model: EmissionModel) -> StateWeights:
    """Invert a measured coincidence level into (alpha^2, beta^2).

    The inversion is linear in ``s``; the Phi and Psi coincidence levels map
    to (1, 0) and (0, 1) and the sum alpha^2 + beta^2 = 1 holds identically.
    A level outside [prob(Psi), prob(Phi)] cannot come from any state of the
    assumed emission model and is rejected.
    """
    k0, k1 = model.k0, model.k1
    if abs(k0 - k1) < _RATE_TOL:
        raise ValueError("k0 = k1 makes the state weights unidentifiable")
    lo = coincidence_prob("psi", model)
    hi = coincidence_prob("phi", model)
    if not lo - 1e-12 <= s <= hi + 1e-12:
        raise ValueError(
            f"coincidence level {s!r} outside the physical range "
            f"[{lo!r}, {hi!r}]: measurement-model violation")
    denom = (k0 - k1) ** 2
    alpha_sq = 2.0 * (s * k0 + s * k1 - k0 * k1) / denom
    beta_sq = (k0 ** 2 + k1 ** 2 - 2.0 * s * (k0 + k1)) / denom
    return StateWeights(float(alpha_sq), float(beta_sq))


# --------------------------------------------------------------------------
# Start-stop coincidence (HBT) simulation with zero-delay gating
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CoincidenceHistogram:
    """Histogram of start-stop delays from a gated coincidence run."""

    bin_edges_ns: np.ndarray
    counts: np.ndarray
    gate_ns: float
    shots: int

    def __post_init__(self):
        if np.any(self.counts < 0):
            raise ValueError("histogram counts must be >= 0")

    @property
    def bin_centers_ns(self) -> np.ndarray:
        return 0.5 * (self.bin_edges_ns[:-1] + self.bin_edges_ns[1:])

    @property
    def total(self) -> int:
        return int(np.sum(self.counts))

    @property
    def rate(self) -> float:
        """Accepted coincidences per shot."""
        return self.total / self.shots

    def to_rows(self) -> list[tuple[float, int]]:
        """(delay_ns, counts) rows for CSV export."""
        return [(float(c), int(n))
                for c, n in zip(self.bin_centers_ns, self.counts)]


def _spin_configs(populations: np.ndarray) -> np.ndarray:
    p = np.asarray(populations, dtype=float)
    if p.shape != (4,) or np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("populations must be 4 nonnegative numbers summing to 1")
    return np.clip(p, 0.0, None) / p.sum()


def simulate_hbt(state: str | np.ndarray, model: EmissionModel, shots: int,
                 gate_ns: float = 0.0, seed: int = 0,
                 bin_width_ns: float = 2.0,
                 max_delay_ns: float = 200.0) -> CoincidenceHistogram:
    """Sample start-stop photon delays for a state and gate out short delays.

    ``state`` is a named kind or a 4-vector of populations.  Each shot draws
    a joint spin configuration, Bernoulli emissions with the spin-dependent
    probabilities, and exponential arrival times with the spin-dependent
    lifetimes; coincidences with |delay| < ``gate_ns`` are discarded.
    """
    if gate_ns < 0:
        raise ValueError("gate must be >= 0")
    pops = _spin_configs(state_populations(state) if isinstance(state, str)
                         else np.asarray(state, dtype=float))
    rng = np.random.default_rng(seed)
    config = rng.choice(4, size=shots, p=pops)
    spin_a = config // 2
    spin_b = config % 2
    k_a = np.where(spin_a == 0, model.k0, model.k1)
    k_b = np.where(spin_b == 0, model.k0, model.k1)
    both = (rng.random(shots) < k_a) & (rng.random(shots) < k_b)
    tau_a = np.where(spin_a[both] == 0, model.tau_bright_s, model.tau_dark_s)
    tau_b = np.where(spin_b[both] == 0, model.tau_bright_s, model.tau_dark_s)
    t_a = rng.exponential(tau_a) * 1e9
    t_b = rng.exponential(tau_b) * 1e9
    delays = t_b - t_a
    delays = delays[np.abs(delays) >= gate_ns]
    edges = np.arange(-max_delay_ns, max_delay_ns + bin_width_ns, bin_width_ns)
    counts, _ = np.histogram(delays, bins=edges)
    return CoincidenceHistogram(edges, counts, gate_ns, shots)


def _gate_survival(tau_a_s: float, tau_b_s: float, gate_ns: float) -> float:
    """P(|t_a - t_b| >= gate) for independent exponential arrival times."""
    la, lb = 1.0 / (tau_a_s * 1e9), 1.0 / (tau_b_s * 1e9)
    return (la * np.exp(-lb * gate_ns) + lb * np.exp(-la * gate_ns)) / (la + lb)


def gated_coincidence(state: str | np.ndarray, model: EmissionModel,
                      gate_ns: float = 0.0) -> float:
    """Expected accepted coincidences per shot (analytic oracle for HBT)."""
    pops = _spin_configs(state_populations(state) if isinstance(state, str)
                         else np.asarray(state, dtype=float))
    out = 0.0
    for cfg, p in enumerate(pops):
        sa, sb = cfg // 2, cfg % 2
        out += (p * model.emission(sa) * model.emission(sb)
                * _gate_survival(model.lifetime_s(sa), model.lifetime_s(sb),
                                 gate_ns))
    return float(out)


def gated_contrast(model: EmissionModel, gate_ns: float = 0.0) -> float:
    """(Phi - Psi) coincidence separation relative to the uncorrelated level."""
    phi = gated_coincidence("phi", model, gate_ns)
    psi = gated_coincidence("psi", model, gate_ns)
    unc = gated_coincidence("uncorrelated", model, gate_ns)
    return (phi - psi) / unc


def histogram_from_delays(delays_ns: np.ndarray, gate_ns: float = 0.0,
                          bin_width_ns: float = 2.0,
                          max_delay_ns: float = 200.0,
                          shots: int | None = None) -> CoincidenceHistogram:
    """Build a gated histogram from externally recorded start-stop delays."""
    d = np.asarray(delays_ns, dtype=float)
    d = d[np.abs(d) >= gate_ns]
    edges = np.arange(-max_delay_ns, max_delay_ns + bin_width_ns, bin_width_ns)
    counts, _ = np.histogram(d, bins=edges)
    return CoincidenceHistogram(edges, counts, gate_ns,
                                shots if shots is not None else d.size)


def read_timestamp_channels(path_start, path_stop) -> np.ndarray:
    """Pairwise start-stop delays [ns] from two one-timestamp-per-line files."""
    start = np.loadtxt(path_start, dtype=float, ndmin=1)
    stop = np.loadtxt(path_stop, dtype=float, ndmin=1)
    n = min(start.size, stop.size)
    return stop[:n] - start[:n]


# --------------------------------------------------------------------------
# Classical correlation matrix from local-probe measurements
# --------------------------------------------------------------------------

def bell_state(kind: str) -> np.ndarray:
    """Two-qubit Bell vector in the (00,01,10,11) basis."""
    v = np.zeros(4, dtype=complex)
    if kind in ("phi+", "phi-"):
        v[0] = 1.0
        v[3] = 1.0 if kind == "phi+" else -1.0
    elif kind in ("psi+", "psi-"):
        v[1] = 1.0
        v[2] = 1.0 if kind == "psi+" else -1.0
    else:
        raise ValueError(f"unknown Bell kind {kind!r}")
    return v / np.sqrt(2.0)


def _qubit_probe(token: str) -> np.ndarray:
    if token == "i":
        return np.eye(2, dtype=complex)
    angle = {"x90": np.pi / 2, "y90": np.pi / 2,
             "x180": np.pi, "y180": np.pi}.get(token)
    if angle is None:
        raise ValueError(f"unknown probe token {token!r}")
    phase = 0.0 if token.startswith("x") else np.pi / 2
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -1j * np.exp(-1j * phase) * s],
                     [-1j * np.exp(1j * phase) * s, c]], dtype=complex)


def probe_unitary(probe: tuple[str, str]) -> np.ndarray:
    """Local probe rotation on both qubits, e.g. ("x90", "i")."""
    return tensor_product(_qubit_probe(probe[0]), _qubit_probe(probe[1]))


DIAGONAL_PROBES = (("i", "i"), ("x180", "i"), ("i", "x180"), ("x180", "x180"))
COHERENCE_PROBES = (("x90", "x90"), ("y90", "y90"), ("x90", "y90"))


def simulate_probe_counts(rho: np.ndarray, probes, shots: int,
                          seed: int = 0) -> dict[tuple[str, str], np.ndarray]:
    """Multinomial population counts after each local probe rotation."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError("expected a 4x4 two-qubit density matrix")
    rng = np.random.default_rng(seed)
    out = {}
    for probe in probes:
        u = probe_unitary(probe)
        p = np.clip(np.real(np.diag(u @ rho @ u.conj().T)), 0.0, None)
        out[tuple(probe)] = rng.multinomial(shots, p / p.sum()).astype(float)
    return out


# How each diagonal probe permutes the basis populations: a pi pulse on one
# qubit swaps its 0 and 1 labels.
_PROBE_PERMUTATION = {
    ("i", "i"): (0, 1, 2, 3),
    ("x180", "i"): (2, 3, 0, 1),
    ("i", "x180"): (1, 0, 3, 2),
    ("x180", "x180"): (3, 2, 1, 0),
}


def classical_correlation_matrix(measurements: dict) -> np.ndarray:
    """4x4 diagonal population-correlation matrix from probe counts.

    Every diagonal probe present contributes an estimate of the unrotated
    populations (by undoing its label permutation); estimates are averaged.
    Probes that mix populations and coherences (pi/2 rotations) are ignored
    here — they probe the x/y correlations instead.
    """
    estimates = []
    for probe, counts in measurements.items():
        perm = _PROBE_PERMUTATION.get(tuple(probe))
        if perm is None:
            continue
        c = np.asarray(counts, dtype=float)
        est = np.empty(4)
        est[list(perm)] = c / c.sum()
        estimates.append(est)
    if not estimates:
        raise ValueError("measurement set lacks main-diagonal probes")
    diag = np.mean(estimates, axis=0)
    return np.diag(diag)


def classical_fidelity(correlation: np.ndarray, kind: str) -> float:
    """Population part of the Bell fidelity, 2*(p_first + p_second) - ...

    For a Phi-family target this is p00 + p11 scaled so a perfect classical
    correlation gives 1; Psi-family uses p01 + p10.
    """
    d = np.real(np.diag(correlation))
    if kind.startswith("phi"):
        return float(d[0] + d[3])
    if kind.startswith("psi"):
        return float(d[1] + d[2])
    raise ValueError(f"unknown Bell kind {kind!r}")
