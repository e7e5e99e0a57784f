"""Hamiltonians for the NV pair: single defects, dipolar coupling, geometry.

Units at the API: frequencies in Hz (linear), magnetic fields in Gauss,
distances in nm, times in seconds.  Each defect's operators are written in
its own local frame with z along the defect symmetry axis; vectors such as
field directions and the pair displacement are given in the lab (cubic
crystal) frame.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from .linalg import ELECTRON_MS, SPIN1, SPIN_HALF, SZ1, tensor_product

# standard NV / nitrogen-15 constants; all are configurable per system
DELTA_HZ = 2.87e9
A_N_HZ = 3.05e6
GAMMA_E_HZ_PER_G = 2.8025e6
GAMMA_N15_HZ_PER_G = -431.6
DIPOLAR_PREFACTOR_HZ_NM3 = 52.04e6

AXIS_111 = np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0)
AXIS_1M1M1 = np.array([1.0, -1.0, -1.0]) / np.sqrt(3.0)


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("zero vector cannot be normalized")
    return v / n


@dataclass(frozen=True)
class SpinConstants:
    delta_hz: float = DELTA_HZ
    a_n_hz: float = A_N_HZ
    gamma_e_hz_per_g: float = GAMMA_E_HZ_PER_G
    gamma_n_hz_per_g: float = GAMMA_N15_HZ_PER_G
    dipolar_prefactor_hz_nm3: float = DIPOLAR_PREFACTOR_HZ_NM3

    def __post_init__(self):
        if self.dipolar_prefactor_hz_nm3 <= 0:
            raise ValueError("dipolar prefactor must be positive")


@dataclass(frozen=True)
class NvOrientation:
    axis: np.ndarray
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "axis", _unit(self.axis))

    def triad(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Deterministic right-handed local frame (x, y, z) with z = axis."""
        z = self.axis
        ref = np.array([0.0, 0.0, 1.0])
        if abs(z @ ref) > 0.9:
            ref = np.array([1.0, 0.0, 0.0])
        x = _unit(ref - (ref @ z) * z)
        y = np.cross(z, x)
        return x, y, z


@dataclass(frozen=True)
class FieldConfig:
    magnitude_gauss: float
    direction: np.ndarray

    def __post_init__(self):
        if self.magnitude_gauss < 0:
            raise ValueError("field magnitude must be >= 0")
        object.__setattr__(self, "direction", _unit(self.direction))

    def vector_gauss(self) -> np.ndarray:
        return self.magnitude_gauss * self.direction

    @classmethod
    def from_polar(cls, magnitude_gauss: float, orientation: NvOrientation,
                   polar_deg: float, azimuth_deg: float = 0.0) -> "FieldConfig":
        """Field at a polar angle from the given NV axis (azimuth in its local frame)."""
        x, y, z = orientation.triad()
        th = np.deg2rad(polar_deg)
        ph = np.deg2rad(azimuth_deg)
        d = np.cos(th) * z + np.sin(th) * (np.cos(ph) * x + np.sin(ph) * y)
        return cls(magnitude_gauss, d)


@dataclass(frozen=True)
class PairGeometry:
    r_ab_nm: float
    n_ab: np.ndarray

    def __post_init__(self):
        if self.r_ab_nm <= 0:
            raise ValueError("pair distance must be positive")
        object.__setattr__(self, "n_ab", _unit(self.n_ab))


def field_in_local_frame(field: FieldConfig, orientation: NvOrientation) -> np.ndarray:
    x, y, z = orientation.triad()
    b = field.vector_gauss()
    return np.array([b @ x, b @ y, b @ z])


def electron_hamiltonian(orientation: NvOrientation, field: FieldConfig,
                         constants: SpinConstants) -> np.ndarray:
    """3x3 electron Hamiltonian in the defect's local frame [Hz]."""
    bx, by, bz = field_in_local_frame(field, orientation)
    sx, sy, sz = SPIN1
    g = constants.gamma_e_hz_per_g
    return constants.delta_hz * (sz @ sz) - g * (bx * sx + by * sy + bz * sz)


def build_single_hamiltonian(orientation: NvOrientation, field: FieldConfig,
                             constants: SpinConstants) -> np.ndarray:
    """Exact 6x6 electron (x) nucleus Hamiltonian of one defect [Hz].

    Contains the full isotropic hyperfine tensor (flip-flop terms included)
    and the nuclear Zeeman term.
    """
    h_el = electron_hamiltonian(orientation, field, constants)
    b_loc = field_in_local_frame(field, orientation)
    i2 = np.eye(2, dtype=complex)
    i3 = np.eye(3, dtype=complex)
    h = tensor_product(h_el, i2)
    for s_op, i_op in zip(SPIN1, SPIN_HALF):
        h += constants.a_n_hz * tensor_product(s_op, i_op)
    for b_comp, i_op in zip(b_loc, SPIN_HALF):
        h -= constants.gamma_n_hz_per_g * b_comp * tensor_product(i3, i_op)
    return h


def _adiabatic_levels(h3: np.ndarray) -> dict[int, tuple[float, np.ndarray]]:
    """Map each mS label to its (energy, eigenvector) by maximum overlap."""
    evals, vecs = np.linalg.eigh(h3)
    out: dict[int, tuple[float, np.ndarray]] = {}
    used: set[int] = set()
    for pos, ms in enumerate(ELECTRON_MS):
        overlaps = np.abs(vecs[pos, :]) ** 2
        order = np.argsort(overlaps)[::-1]
        k = next(int(i) for i in order if int(i) not in used)
        used.add(k)
        out[ms] = (float(evals[k]), vecs[:, k])
    return out


def level_energies(orientation: NvOrientation, field: FieldConfig,
                   constants: SpinConstants) -> dict[int, float]:
    """Electron level energies omega^(mS) [Hz], adiabatically labelled."""
    levels = _adiabatic_levels(electron_hamiltonian(orientation, field, constants))
    return {ms: e for ms, (e, _) in levels.items()}


def effective_hyperfine_field(ms: int, orientation: NvOrientation, field: FieldConfig,
                              constants: SpinConstants) -> np.ndarray:
    """h^(mS) = a_N <mS|S|mS> in the defect's local frame [Hz]."""
    if ms not in (1, 0, -1):
        raise ValueError("mS must be one of +1, 0, -1")
    levels = _adiabatic_levels(electron_hamiltonian(orientation, field, constants))
    _, v = levels[ms]
    return constants.a_n_hz * np.array([(v.conj() @ s @ v).real for s in SPIN1])


def conditional_nuclear_field(ms: int, orientation: NvOrientation, field: FieldConfig,
                              constants: SpinConstants) -> np.ndarray:
    """Total nuclear field h^(mS) [Hz]: effective hyperfine plus nuclear Zeeman."""
    b_loc = field_in_local_frame(field, orientation)
    return (effective_hyperfine_field(ms, orientation, field, constants)
            - constants.gamma_n_hz_per_g * b_loc)


def dipolar_angular_factor(axis_a: np.ndarray, axis_b: np.ndarray, n_ab: np.ndarray) -> float:
    za, zb, n = _unit(axis_a), _unit(axis_b), _unit(n_ab)
    return float(za @ zb - 3.0 * (za @ n) * (n @ zb))


def dipolar_coupling(geometry: PairGeometry, orientation_a: NvOrientation,
                     orientation_b: NvOrientation, constants: SpinConstants) -> float:
    """Secular zz dipolar coupling nu_dip [Hz] (signed)."""
    factor = dipolar_angular_factor(orientation_a.axis, orientation_b.axis, geometry.n_ab)
    return constants.dipolar_prefactor_hz_nm3 / geometry.r_ab_nm ** 3 * factor


def max_angular_factor(orientation_a: NvOrientation, orientation_b: NvOrientation,
                       resolution_deg: float = 0.1) -> float:
    """Max |angular factor| over displacement directions, by exhaustive grid scan."""
    th = np.deg2rad(np.arange(0.0, 180.0 + resolution_deg, resolution_deg))
    ph = np.deg2rad(np.arange(0.0, 360.0, max(resolution_deg, 0.1) * 4))
    st, ct = np.sin(th)[:, None], np.cos(th)[:, None]
    nx = st * np.cos(ph)[None, :]
    ny = st * np.sin(ph)[None, :]
    nz = ct * np.ones_like(ph)[None, :]
    za, zb = orientation_a.axis, orientation_b.axis
    dot_a = za[0] * nx + za[1] * ny + za[2] * nz
    dot_b = zb[0] * nx + zb[1] * ny + zb[2] * nz
    factor = float(za @ zb) - 3.0 * dot_a * dot_b
    return float(np.max(np.abs(factor)))


def max_distance_from_coupling(nu_dip_hz: float, orientation_a: NvOrientation,
                               orientation_b: NvOrientation, constants: SpinConstants,
                               resolution_deg: float = 0.1) -> float:
    """Largest distance [nm] compatible with a measured |coupling|."""
    if nu_dip_hz <= 0:
        raise ValueError("nu_dip must be positive")
    fmax = max_angular_factor(orientation_a, orientation_b, resolution_deg)
    return float((fmax * constants.dipolar_prefactor_hz_nm3 / nu_dip_hz) ** (1.0 / 3.0))


def dipolar_hamiltonian_full(geometry: PairGeometry, orientation_a: NvOrientation,
                             orientation_b: NvOrientation,
                             constants: SpinConstants) -> np.ndarray:
    """Full 9x9 dipolar tensor (flip-flop terms included), oracle for the secular form.

    Each defect's spin operators are quantized along its own axis; lab-frame
    components are obtained through the local triads.
    """
    pref = constants.dipolar_prefactor_hz_nm3 / geometry.r_ab_nm ** 3
    n = geometry.n_ab
    ta = orientation_a.triad()
    tb = orientation_b.triad()
    i3 = np.eye(3, dtype=complex)
    # lab-frame vector operators: S_lab[u] = sum_i (e_i . u_hat) S_i
    sa_lab = [sum(float(e[u]) * tensor_product(s, i3) for e, s in zip(ta, SPIN1))
              for u in range(3)]
    sb_lab = [sum(float(e[u]) * tensor_product(i3, s) for e, s in zip(tb, SPIN1))
              for u in range(3)]
    dot_ab = sum(sa_lab[u] @ sb_lab[u] for u in range(3))
    sa_n = sum(float(n[u]) * sa_lab[u] for u in range(3))
    sb_n = sum(float(n[u]) * sb_lab[u] for u in range(3))
    return pref * (dot_ab - 3.0 * (sa_n @ sb_n))


@dataclass(frozen=True)
class SpinSystem:
    """Full physical description of the defect pair."""

    constants: SpinConstants = dc_field(default_factory=SpinConstants)
    orientation_a: NvOrientation = dc_field(default_factory=lambda: NvOrientation(AXIS_111, "A"))
    orientation_b: NvOrientation = dc_field(default_factory=lambda: NvOrientation(AXIS_1M1M1, "B"))
    field: FieldConfig = dc_field(default_factory=lambda: FieldConfig(32.0, AXIS_111))
    nu_dip_hz: float | None = None
    geometry: PairGeometry | None = None

    def __post_init__(self):
        if self.nu_dip_hz is None and self.geometry is None:
            raise ValueError("either nu_dip_hz or geometry must be given")
        if self.nu_dip_hz is not None and self.geometry is not None:
            derived = dipolar_coupling(self.geometry, self.orientation_a,
                                       self.orientation_b, self.constants)
            if abs(derived - self.nu_dip_hz) > 0.01 * abs(self.nu_dip_hz):
                raise ValueError(
                    f"nu_dip {self.nu_dip_hz:g} Hz inconsistent with geometry ({derived:g} Hz)")

    @property
    def coupling_hz(self) -> float:
        if self.nu_dip_hz is not None:
            return self.nu_dip_hz
        return dipolar_coupling(self.geometry, self.orientation_a,
                                self.orientation_b, self.constants)

    def to_json_dict(self) -> dict:
        c = self.constants
        x, y, z = self.orientation_a.triad()
        b = self.field.vector_gauss()
        if self.field.magnitude_gauss > 0:
            d = self.field.direction
            polar = float(np.degrees(np.arccos(np.clip(d @ z, -1.0, 1.0))))
            azim = float(np.degrees(np.arctan2(d @ y, d @ x)))
        else:
            polar, azim = 0.0, 0.0
        out = {
            "delta_hz": c.delta_hz,
            "a_n_hz": c.a_n_hz,
            "gamma_e_hz_per_g": c.gamma_e_hz_per_g,
            "gamma_n_hz_per_g": c.gamma_n_hz_per_g,
            "dipolar_prefactor_hz_nm3": c.dipolar_prefactor_hz_nm3,
            "axes": {"A": list(self.orientation_a.axis), "B": list(self.orientation_b.axis)},
            "field_gauss": self.field.magnitude_gauss,
            "field_polar_deg": polar,
            "field_azimuth_deg": azim,
        }
        if self.nu_dip_hz is not None:
            out["nu_dip_hz"] = self.nu_dip_hz
        if self.geometry is not None:
            out["geometry"] = {"r_ab_nm": self.geometry.r_ab_nm, "n_ab": list(self.geometry.n_ab)}
        return out

    @classmethod
    def from_json_dict(cls, d: dict) -> "SpinSystem":
        c = SpinConstants(
            delta_hz=d.get("delta_hz", DELTA_HZ),
            a_n_hz=d.get("a_n_hz", A_N_HZ),
            gamma_e_hz_per_g=d.get("gamma_e_hz_per_g", GAMMA_E_HZ_PER_G),
            gamma_n_hz_per_g=d.get("gamma_n_hz_per_g", GAMMA_N15_HZ_PER_G),
            dipolar_prefactor_hz_nm3=d.get("dipolar_prefactor_hz_nm3",
                                           DIPOLAR_PREFACTOR_HZ_NM3),
        )
        axes = d.get("axes", {})
        oa = NvOrientation(np.asarray(axes.get("A", AXIS_111)), "A")
        ob = NvOrientation(np.asarray(axes.get("B", AXIS_1M1M1)), "B")
        field = FieldConfig.from_polar(d.get("field_gauss", 0.0), oa,
                                       d.get("field_polar_deg", 0.0),
                                       d.get("field_azimuth_deg", 0.0))
        geom = None
        if "geometry" in d:
            g = d["geometry"]
            geom = PairGeometry(g["r_ab_nm"], np.asarray(g["n_ab"]))
        return cls(constants=c, orientation_a=oa, orientation_b=ob, field=field,
                   nu_dip_hz=d.get("nu_dip_hz"), geometry=geom)

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SpinSystem":
        return cls.from_json_dict(json.loads(text))


def reference_system(nu_dip_hz: float = 4.93e3, field_gauss: float = 32.0) -> SpinSystem:
    """The default pair: [111]/[1,-1,-1] axes, field along defect A's axis."""
    oa = NvOrientation(AXIS_111, "A")
    ob = NvOrientation(AXIS_1M1M1, "B")
    return SpinSystem(orientation_a=oa, orientation_b=ob,
                      field=FieldConfig(field_gauss, AXIS_111), nu_dip_hz=nu_dip_hz)


def build_pair_hamiltonian(system: SpinSystem, subspace: str = "electron") -> np.ndarray:
    """Secular pair Hamiltonian: 9x9 ('electron') or 36x36 ('full') [Hz].

    Level energies come from diagonalizing each defect's electron Hamiltonian
    exactly; nuclear parts use the conditional effective hyperfine fields.
    Electron flip-flop terms between the defects are dropped (secular form).
    """
    c = system.constants
    nu = system.coupling_hz
    ea = level_energies(system.orientation_a, system.field, c)
    eb = level_energies(system.orientation_b, system.field, c)
    if subspace == "electron":
        da = np.diag([ea[ms] for ms in ELECTRON_MS]).astype(complex)
        db = np.diag([eb[ms] for ms in ELECTRON_MS]).astype(complex)
        i3 = np.eye(3, dtype=complex)
        return (tensor_product(da, i3) + tensor_product(i3, db)
                + nu * tensor_product(SZ1, SZ1))
    if subspace != "full":
        raise ValueError(f"unknown subspace {subspace!r}")
    i2 = np.eye(2, dtype=complex)
    i3 = np.eye(3, dtype=complex)
    i6 = np.eye(6, dtype=complex)

    def defect_block(orientation, energies):
        blk = np.zeros((6, 6), dtype=complex)
        b_loc = field_in_local_frame(system.field, orientation)
        for pos, ms in enumerate(ELECTRON_MS):
            proj = np.zeros((3, 3), dtype=complex)
            proj[pos, pos] = 1.0
            h_eff = effective_hyperfine_field(ms, orientation, system.field, c)
            h_nuc = h_eff - c.gamma_n_hz_per_g * b_loc
            nuc = energies[ms] * i2 + sum(h_nuc[i] * SPIN_HALF[i] for i in range(3))
            blk += tensor_product(proj, nuc)
        return blk

    ha = defect_block(system.orientation_a, ea)
    hb = defect_block(system.orientation_b, eb)
    h = tensor_product(ha, i6) + tensor_product(i6, hb)
    h += nu * tensor_product(tensor_product(SZ1, i2), tensor_product(SZ1, i2))
    return h
