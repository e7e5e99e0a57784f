"""Dephasing noise: random phase sampling, analytic envelopes, ESEEM modulation.

Envelope conventions (configurable through the preset, documented here once):

* ``t2_star_s`` is the Gaussian sigma of the free-induction envelope of the
  transition it was measured on: L_FID(t) = exp(-(r t / T2*)^2 / 2) with
  r = |delta_mS| / |delta_mS measured|.
* ``t2_s`` is the echo decay time of the same transition with envelope
  L_Hahn(t) = exp(-r^2 (t / T2)^p), p = ``hahn_exponent`` (default 1).
* A random phase is phi = 2 pi delta_mS * integral of b(t) f(t) dt [rad]
  with the noise field b in Hz and f the echo filter (+/-1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import ELECTRON_MS

QUASI_STATIC = "quasi-static"
ORNSTEIN_UHLENBECK = "ornstein-uhlenbeck"


@dataclass(frozen=True)
class NoisePreset:
    t2_star_s: float
    t2_s: float
    kind: str = QUASI_STATIC
    tau_c_s: float | None = None
    hahn_exponent: float = 1.0
    delta_ms_ref: int = 1  # |delta_mS| of the transition the times refer to

    def __post_init__(self):
        if not (self.t2_s >= self.t2_star_s > 0):
            raise ValueError("need t2 >= t2_star > 0")
        if self.kind not in (QUASI_STATIC, ORNSTEIN_UHLENBECK):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == ORNSTEIN_UHLENBECK and not self.tau_c_s:
            raise ValueError("OU noise requires a correlation time")

    @property
    def sigma_b_hz(self) -> float:
        """Noise field standard deviation calibrated from T2*."""
        if self.kind == QUASI_STATIC:
            return 1.0 / (2.0 * np.pi * self.delta_ms_ref * self.t2_star_s)
        return calibrate_ou_sigma(self.t2_s, self.tau_c_s, self.delta_ms_ref,
                                  self.hahn_exponent)

    def to_json_dict(self) -> dict:
        return {"t2_star_s": self.t2_star_s, "t2_s": self.t2_s, "kind": self.kind,
                "tau_c_s": self.tau_c_s, "hahn_exponent": self.hahn_exponent,
                "delta_ms_ref": self.delta_ms_ref}

    @classmethod
    def from_json_dict(cls, d: dict) -> "NoisePreset":
        return cls(t2_star_s=d["t2_star_s"], t2_s=d["t2_s"],
                   kind=d.get("kind", QUASI_STATIC), tau_c_s=d.get("tau_c_s"),
                   hahn_exponent=d.get("hahn_exponent", 1.0),
                   delta_ms_ref=d.get("delta_ms_ref", 1))


@dataclass(frozen=True)
class EchoSchedule:
    """Free-evolution segments with their filter values f in {+1, -1}."""

    boundaries_s: np.ndarray
    filters: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boundaries_s, dtype=float)
        f = np.asarray(self.filters, dtype=float)
        if b.size != f.size + 1 or np.any(np.diff(b) < 0):
            raise ValueError("need ascending boundaries with one filter per segment")
        if not np.all(np.abs(f) == 1.0):
            raise ValueError("filter values must be +1 or -1")
        object.__setattr__(self, "boundaries_s", b)
        object.__setattr__(self, "filters", f)

    @property
    def durations_s(self) -> np.ndarray:
        return np.diff(self.boundaries_s)

    @classmethod
    def fid(cls, t: float) -> "EchoSchedule":
        return cls(np.array([0.0, t]), np.array([1.0]))

    @classmethod
    def hahn(cls, tau: float) -> "EchoSchedule":
        return cls(np.array([0.0, tau, 2.0 * tau]), np.array([1.0, -1.0]))


def ou_segment_covariance(boundaries_s: np.ndarray, tau_c_s: float) -> np.ndarray:
    """Covariance of the per-segment integrals of a unit-variance OU process."""
    b = np.asarray(boundaries_s, dtype=float)
    n = b.size - 1
    cov = np.empty((n, n))
    tc = tau_c_s
    for i in range(n):
        d = b[i + 1] - b[i]
        cov[i, i] = 2.0 * (tc * d - tc * tc * (1.0 - np.exp(-d / tc)))
        for j in range(i + 1, n):
            gap = b[j] - b[i + 1]
            di = b[i + 1] - b[i]
            dj = b[j + 1] - b[j]
            cov[i, j] = cov[j, i] = (tc * tc * np.exp(-gap / tc)
                                     * (1.0 - np.exp(-di / tc))
                                     * (1.0 - np.exp(-dj / tc)))
    return cov


def _filtered_phase_std(preset: NoisePreset, schedule: EchoSchedule) -> float:
    """Std of integral b(t) f(t) dt in Hz*s for a unit delta_mS phase."""
    if preset.kind == QUASI_STATIC:
        return preset.sigma_b_hz * abs(float(schedule.filters @ schedule.durations_s))
    cov = ou_segment_covariance(schedule.boundaries_s, preset.tau_c_s)
    f = schedule.filters
    return preset.sigma_b_hz * float(np.sqrt(max(f @ cov @ f, 0.0)))


def sample_phases(preset: NoisePreset, schedule: EchoSchedule, delta_ms: int,
                  n: int, rng: np.random.Generator) -> np.ndarray:
    """n random phases phi [rad] for a coherence with the given delta_mS."""
    if preset.kind == QUASI_STATIC:
        b = preset.sigma_b_hz * rng.standard_normal(n)
        integral = b * float(schedule.filters @ schedule.durations_s)
    else:
        cov = preset.sigma_b_hz ** 2 * ou_segment_covariance(
            schedule.boundaries_s, preset.tau_c_s)
        chol = np.linalg.cholesky(cov + 1e-30 * np.eye(cov.shape[0]))
        seg = rng.standard_normal((n, cov.shape[0])) @ chol.T
        integral = seg @ schedule.filters
    return 2.0 * np.pi * delta_ms * integral


def sample_phase(preset: NoisePreset, schedule: EchoSchedule, delta_ms: int,
                 seed: int) -> float:
    """Single reproducible phase draw for (seed, schedule)."""
    rng = np.random.default_rng(seed)
    return float(sample_phases(preset, schedule, delta_ms, 1, rng)[0])


def segment_phase_samples(preset: NoisePreset, boundaries_s: np.ndarray, n: int,
                          rng: np.random.Generator,
                          normals: np.ndarray | None = None) -> np.ndarray:
    """Per-segment unit-delta_mS phase samples [rad], shape (n, n_segments).

    ``normals`` allows a caller to reuse one stream of standard normals for
    two defects (correlated-noise mode).
    """
    b = np.asarray(boundaries_s, dtype=float)
    nseg = b.size - 1
    if preset.kind == QUASI_STATIC:
        z = normals if normals is not None else rng.standard_normal((n, 1))
        integ = (preset.sigma_b_hz * z[:, :1]) * np.diff(b)[None, :]
    else:
        cov = preset.sigma_b_hz ** 2 * ou_segment_covariance(b, preset.tau_c_s)
        chol = np.linalg.cholesky(cov + 1e-30 * np.eye(nseg))
        z = normals if normals is not None else rng.standard_normal((n, nseg))
        integ = z[:, :nseg] @ chol.T
    return 2.0 * np.pi * integ


def decoherence_envelope(preset: NoisePreset, experiment: str, delta_ms: int,
                         t: float) -> float:
    """Analytic coherence envelope L(t) in [0, 1]."""
    if t < 0:
        raise ValueError("time must be >= 0")
    r = abs(delta_ms) / preset.delta_ms_ref
    if experiment == "fid":
        if preset.kind == QUASI_STATIC:
            return float(np.exp(-0.5 * (r * t / preset.t2_star_s) ** 2))
        std = _filtered_phase_std(preset, EchoSchedule.fid(t))
        return float(np.exp(-0.5 * (2.0 * np.pi * delta_ms * std) ** 2))
    if experiment == "hahn":
        return float(np.exp(-(r ** 2) * (t / preset.t2_s) ** preset.hahn_exponent))
    raise ValueError(f"unknown experiment {experiment!r}")


def envelope_from_schedule(preset: NoisePreset, schedule: EchoSchedule,
                           delta_ms: int) -> float:
    """Gaussian-noise envelope <exp(i phi)> for an arbitrary filter schedule."""
    std = _filtered_phase_std(preset, schedule)
    return float(np.exp(-0.5 * (2.0 * np.pi * delta_ms * std) ** 2))


def calibrate_ou_sigma(t2_target_s: float, tau_c_s: float, delta_ms_ref: int = 1,
                       hahn_exponent: float = 1.0) -> float:
    """Noise amplitude [Hz] such that the OU Hahn envelope hits 1/e at t = T2.

    Bisection on the closed-form filtered phase variance of the OU process.
    """
    sched = EchoSchedule.hahn(t2_target_s / 2.0)
    cov = ou_segment_covariance(sched.boundaries_s, tau_c_s)
    f = sched.filters
    unit_var = float(f @ cov @ f)  # variance for sigma_b = 1
    # want 0.5 * (2 pi dm sigma)^2 * unit_var = 1
    return float(np.sqrt(2.0 / unit_var) / (2.0 * np.pi * delta_ms_ref))


def _su2_propagator(h_vec_hz: np.ndarray, t: float) -> np.ndarray:
    """exp(-i 2 pi (h . I) t) for a spin-1/2 [2x2]."""
    from .linalg import SPIN_HALF
    h = np.asarray(h_vec_hz, dtype=float)
    gen = sum(h[i] * SPIN_HALF[i] for i in range(3))
    evals, vecs = np.linalg.eigh(gen)
    return (vecs * np.exp(-2j * np.pi * evals * t)) @ vecs.conj().T


def modulation_fid(h1_hz: np.ndarray, h2_hz: np.ndarray, t: float) -> float:
    """FID coherence modulation from the intrinsic spin-1/2 nucleus.

    Exact two-propagator trace; reduces to cos(pi |h1| t) when one of the
    conditional fields vanishes, and to 1 when h1 = h2.
    """
    u1 = _su2_propagator(h1_hz, t)
    u2 = _su2_propagator(h2_hz, t)
    g = np.trace(u1 @ u2.conj().T) / 2.0
    return float(g.real)


def modulation_hahn(h1_hz: np.ndarray, h2_hz: np.ndarray, tau: float) -> float:
    """Hahn echo modulation: exact four-propagator trace.

    Collinear (parallel or antiparallel) conditional fields give exactly 1.
    """
    u1 = _su2_propagator(h1_hz, tau)
    u2 = _su2_propagator(h2_hz, tau)
    g = np.trace(u1 @ u2 @ u1.conj().T @ u2.conj().T) / 2.0
    return float(g.real)


def _pair_labels(dim: int) -> list[tuple[int, int]]:
    if dim == 9:
        return [(ma, mb) for ma in ELECTRON_MS for mb in ELECTRON_MS]
    if dim == 36:
        out = []
        for ma in ELECTRON_MS:
            for _ in range(2):
                for mb in ELECTRON_MS:
                    out.extend([(ma, mb)] * 2)
        return out
    raise ValueError("dephasing channel defined on 9- or 36-dim states only")


def apply_dephasing(rho: np.ndarray, l_a: float, l_b: float) -> np.ndarray:
    """Multiply each electron coherence by per-defect envelopes.

    ``l_a``/``l_b`` are the single-quantum envelope values; a coherence with
    electron quantum number differences (dmA, dmB) is scaled by
    l_a^(dmA^2) * l_b^(dmB^2) (Gaussian phase statistics). Populations and
    purely nuclear coherences are untouched.
    """
    if not (0.0 <= l_a <= 1.0 and 0.0 <= l_b <= 1.0):
        raise ValueError("envelopes must lie in [0, 1]")
    rho = np.asarray(rho, dtype=complex)
    labels = _pair_labels(rho.shape[0])
    ms_a = np.array([la[0] for la in labels], dtype=float)
    ms_b = np.array([la[1] for la in labels], dtype=float)
    dma = np.abs(ms_a[:, None] - ms_a[None, :])
    dmb = np.abs(ms_b[:, None] - ms_b[None, :])
    factor = (l_a ** (dma ** 2)) * (l_b ** (dmb ** 2))
    return rho * factor
