"""Implantation statistics and super-resolution pair localization.

Implantation side: ions pass a rectangular aperture (uniform flux) and
scatter laterally with a Gaussian straggle; pair creation is scored by the
fraction of ion pairs landing within a strong-coupling distance.

Localization side: three confocal scans (no pulse, pi on A, pi on B) give two
single-emitter difference images; their cross-correlation peaks at the
emitter separation, refined by fitting an elliptical Gaussian to the cap.
The out-of-plane component is recovered separately by intersecting the
dipolar-coupling distance constraint with the measured lateral distance.

Lengths are in nm throughout.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np
from scipy.signal import correlate

from .system import SpinConstants, NvOrientation, dipolar_angular_factor

APERTURE_WIDTH_NM = 50.0
APERTURE_HEIGHT_NM = 40.0
STRAGGLE_1MEV_NM = 118.9
STRONG_COUPLING_NM = 30.0


@dataclass(frozen=True)
class ApertureSpec:
    """Rectangular implantation aperture with homogeneous flux."""

    width_nm: float = APERTURE_WIDTH_NM
    height_nm: float = APERTURE_HEIGHT_NM

    def __post_init__(self):
        if self.width_nm <= 0 or self.height_nm <= 0:
            raise ValueError("aperture dimensions must be positive")


@dataclass(frozen=True)
class StraggleModel:
    """Lateral ion straggle; ``definition`` selects what sigma_nm means.

    "per-axis": sigma_nm is the Gaussian standard deviation of each lateral
    axis.  "radial": sigma_nm is the rms radial spread, i.e. each axis gets
    sigma_nm / sqrt(2).
    """

    sigma_nm: float = STRAGGLE_1MEV_NM
    definition: str = "per-axis"

    def __post_init__(self):
        if self.sigma_nm <= 0:
            raise ValueError("straggle must be positive")
        if self.definition not in ("per-axis", "radial"):
            raise ValueError("definition must be 'per-axis' or 'radial'")

    @property
    def sigma_axis_nm(self) -> float:
        if self.definition == "per-axis":
            return self.sigma_nm
        return self.sigma_nm / np.sqrt(2.0)


def sample_landings(aperture: ApertureSpec | None, straggle: StraggleModel | None,
                    n: int, seed: int = 0) -> np.ndarray:
    """Lateral stopping positions of ``n`` ions, shape (n, 2)."""
    if n < 1:
        raise ValueError("need at least one ion")
    rng = np.random.default_rng(seed)
    pos = np.zeros((n, 2))
    if aperture is not None:
        pos[:, 0] = rng.uniform(-aperture.width_nm / 2, aperture.width_nm / 2, n)
        pos[:, 1] = rng.uniform(-aperture.height_nm / 2, aperture.height_nm / 2, n)
    if straggle is not None:
        pos += rng.normal(0.0, straggle.sigma_axis_nm, size=(n, 2))
    return pos


@dataclass(frozen=True)
class PairDistanceStats:
    distances_nm: np.ndarray
    fraction_below: float
    threshold_nm: float


def pair_distance_stats(landings: np.ndarray, threshold_nm: float = STRONG_COUPLING_NM,
                        pairing: str = "consecutive") -> PairDistanceStats:
    """Pair distances from a landing sample and the fraction below a cutoff.

    "consecutive" pairs ion 2i with ion 2i+1 (statistically independent
    pairs); "all" uses every ion pair.
    """
    pos = np.asarray(landings, dtype=float)
    if pos.ndim != 2 or pos.shape[0] < 2:
        raise ValueError("need at least two landing positions")
    if pairing == "consecutive":
        m = (pos.shape[0] // 2) * 2
        d = np.linalg.norm(pos[0:m:2] - pos[1:m:2], axis=1)
    elif pairing == "all":
        diff = pos[:, None, :] - pos[None, :, :]
        iu = np.triu_indices(pos.shape[0], k=1)
        d = np.linalg.norm(diff[iu], axis=1)
    else:
        raise ValueError("pairing must be 'consecutive' or 'all'")
    frac = float(np.mean(d < threshold_nm))
    return PairDistanceStats(d, frac, threshold_nm)


def rayleigh_pair_fraction(threshold_nm: float, sigma_axis_nm: float) -> float:
    """Closed-form P(pair distance < d0) for pure Gaussian straggle.

    The coordinate difference of two independent ions is Gaussian with
    per-axis sigma*sqrt(2), so the distance is Rayleigh and
    P(d < d0) = 1 - exp(-d0^2 / (4 sigma^2)).
    """
    return float(1.0 - np.exp(-threshold_nm ** 2 / (4.0 * sigma_axis_nm ** 2)))


def rectangle_pair_fraction(aperture: ApertureSpec, threshold_nm: float,
                            n_quad: int = 2001) -> float:
    """P(distance < d0) for two independent uniform points in the aperture.

    Quadrature over the triangular distributions of the per-axis coordinate
    differences; exact up to grid resolution (no Monte Carlo noise).
    """
    def tri(width, m):
        x = np.linspace(-width, width, m)
        p = (1.0 - np.abs(x) / width) / width
        return x, p

    dx, px = tri(aperture.width_nm, n_quad)
    dy, py = tri(aperture.height_nm, n_quad)
    inside = (dx[:, None] ** 2 + dy[None, :] ** 2) < threshold_nm ** 2
    w = px[:, None] * py[None, :] * inside
    step = (dx[1] - dx[0]) * (dy[1] - dy[0])
    return float(np.sum(w) * step)


def pair_yield(table_rows, aperture: ApertureSpec | None,
               d_strong_nm: float = STRONG_COUPLING_NM, n: int = 100000,
               seed: int = 0) -> list[tuple[float, float]]:
    """Pair-creation yield per straggle-table row (energy_kev, sigma, depth).

    Yield is the probability that a pair lands within ``d_strong_nm``
    laterally under the aperture + straggle model.
    """
    rows = list(table_rows)
    if not rows:
        raise ValueError("straggle table is empty")
    out = []
    for i, (energy_kev, sigma_nm, _depth_nm) in enumerate(rows):
        landings = sample_landings(aperture, StraggleModel(sigma_nm), n,
                                   seed=seed + i)
        stats = pair_distance_stats(landings, d_strong_nm)
        out.append((float(energy_kev), stats.fraction_below))
    return out


def load_straggle_table(path) -> list[tuple[float, float, float]]:
    """Read (energy_kev, sigma_nm, depth_nm) rows from a CSV file."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(rec[0]), float(rec[1]), float(rec[2])))
            except ValueError:
                continue  # header line
    return rows


# --------------------------------------------------------------------------
# Super-resolution localization by difference-image convolution
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ConfocalImage:
    """Raw photon-count scan on a square-pixel grid."""

    counts: np.ndarray
    pitch_nm: float

    def __post_init__(self):
        if np.any(self.counts < 0):
            raise ValueError("photon counts must be >= 0")
        if self.pitch_nm <= 0:
            raise ValueError("pixel pitch must be positive")


@dataclass(frozen=True)
class PsfModel:
    """Elliptical Gaussian point-spread function."""

    sigma_x_nm: float
    sigma_y_nm: float
    amplitude: float = 1.0

    def __post_init__(self):
        if self.sigma_x_nm <= 0 or self.sigma_y_nm <= 0:
            raise ValueError("PSF widths must be positive")

    def evaluate(self, x_nm: np.ndarray, y_nm: np.ndarray,
                 x0_nm: float, y0_nm: float) -> np.ndarray:
        gx = np.exp(-0.5 * ((x_nm - x0_nm) / self.sigma_x_nm) ** 2)
        gy = np.exp(-0.5 * ((y_nm - y0_nm) / self.sigma_y_nm) ** 2)
        return self.amplitude * gy[:, None] * gx[None, :]


def image_grid(n_pixels: int, pitch_nm: float) -> tuple[np.ndarray, np.ndarray]:
    """Centered pixel coordinates for an n x n scan."""
    half = (n_pixels - 1) / 2.0
    axis = (np.arange(n_pixels) - half) * pitch_nm
    return axis, axis


def synth_difference_images(positions_nm, psf: PsfModel,
                            contrasts: tuple[float, float] = (1.0, 1.0),
                            counts_scale: float = 0.0, n_pixels: int = 64,
                            pitch_nm: float = 20.0,
                            seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Simulate the three-scan protocol and return the two difference images.

    Scans: reference (both emitters bright), pi pulse on A, pi pulse on B.
    Each scan gets Poisson shot noise when ``counts_scale`` > 0 (expected
    peak counts per emitter); difference image i = reference - pi-on-i.
    """
    pos = np.asarray(positions_nm, dtype=float)
    if pos.shape != (2, 2):
        raise ValueError("exactly two emitter positions are required")
    xs, ys = image_grid(n_pixels, pitch_nm)
    img_a = psf.evaluate(xs, ys, pos[0, 0], pos[0, 1])
    img_b = psf.evaluate(xs, ys, pos[1, 0], pos[1, 1])
    ca, cb = contrasts
    reference = img_a + img_b
    scan_pi_a = (1.0 - ca) * img_a + img_b
    scan_pi_b = img_a + (1.0 - cb) * img_b
    if counts_scale > 0:
        rng = np.random.default_rng(seed)
        reference, scan_pi_a, scan_pi_b = (
            rng.poisson(counts_scale * im).astype(float)
            for im in (reference, scan_pi_a, scan_pi_b))
    else:
        reference, scan_pi_a, scan_pi_b = (
            im.copy() for im in (reference, scan_pi_a, scan_pi_b))
    return reference - scan_pi_a, reference - scan_pi_b


def convolve_images(image_a: np.ndarray, image_b: np.ndarray,
                    method: str = "fft") -> np.ndarray:
    """Cross-correlation map whose peak sits at the B-minus-A displacement."""
    a = np.asarray(image_a, dtype=float)
    b = np.asarray(image_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("images must share a grid")
    if method not in ("fft", "direct"):
        raise ValueError("method must be 'fft' or 'direct'")
    return correlate(b, a, mode="full", method=method)


def _gaussian_cap_fit(conv: np.ndarray, cap_fraction: float = 0.5) -> tuple[float, float]:
    """Subpixel peak position of a correlation map (row, col).

    Fits log(C) = quadratic over the contiguous cap above ``cap_fraction`` of
    the maximum — an elliptical Gaussian cap in linear units.
    """
    peak = np.unravel_index(np.argmax(conv), conv.shape)
    cmax = conv[peak]
    if cmax <= 0 or not np.isfinite(cmax):
        raise ValueError("correlation map has no usable peak")
    mask = conv > cap_fraction * cmax
    rows, cols = np.nonzero(mask)
    if rows.size < 6:
        # not enough points for the quadratic; fall back to the grid argmax
        return float(peak[0]), float(peak[1])
    z = np.log(conv[rows, cols])
    r = rows.astype(float)
    c = cols.astype(float)
    basis = np.stack([np.ones_like(r), r, c, r * r, c * c, r * c], axis=1)
    coef, *_ = np.linalg.lstsq(basis, z, rcond=None)
    _, br, bc, arr, acc, arc = coef
    # stationary point of the quadratic form
    hess = np.array([[2 * arr, arc], [arc, 2 * acc]])
    grad = np.array([br, bc])
    try:
        shift = np.linalg.solve(hess, -grad)
    except np.linalg.LinAlgError:
        return float(peak[0]), float(peak[1])
    if not np.all(np.isfinite(shift)) or np.linalg.norm(shift - peak) > 5 + max(conv.shape) / 4:
        return float(peak[0]), float(peak[1])
    return float(shift[0]), float(shift[1])


def locate_by_convolution(image_a: np.ndarray, image_b: np.ndarray,
                          pitch_nm: float, method: str = "fft",
                          cap_fraction: float = 0.5) -> np.ndarray:
    """Displacement vector (dx, dy) [nm] from emitter A to emitter B."""
    conv = convolve_images(image_a, image_b, method)
    if np.ptp(conv) <= 0:
        raise ValueError("flat correlation map: no emitters to locate")
    row, col = _gaussian_cap_fit(conv, cap_fraction)
    center = (np.asarray(image_a.shape, dtype=float) - 1.0)
    dy = (row - center[0]) * pitch_nm
    dx = (col - center[1]) * pitch_nm
    return np.array([dx, dy])


# --------------------------------------------------------------------------
# Absolute (3D) distance from coupling strength + lateral distance
# --------------------------------------------------------------------------

def absolute_distance(lateral_nm: float, nu_dip_hz: float,
                      orientation_a: NvOrientation, orientation_b: NvOrientation,
                      constants: SpinConstants = SpinConstants(),
                      lateral_tol_nm: float = 1.7,
                      n_grid: int = 721) -> tuple[float, float]:
    """3D distance interval consistent with the coupling and lateral distance.

    For every candidate separation direction the coupling fixes the distance
    via nu = prefactor * |angular factor| / r^3; directions whose implied
    lateral component (projection onto the focal plane, normal along z)
    matches the measured one within ``lateral_tol_nm`` contribute their r.
    """
    if lateral_nm <= 0 or nu_dip_hz <= 0:
        raise ValueError("lateral distance and coupling must be positive")
    theta = np.linspace(0.0, np.pi, n_grid)
    phi = np.linspace(0.0, 2.0 * np.pi, 2 * n_grid, endpoint=False)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    nx = np.sin(tt) * np.cos(pp)
    ny = np.sin(tt) * np.sin(pp)
    nz = np.cos(tt)
    dirs = np.stack([nx, ny, nz], axis=-1).reshape(-1, 3)
    factors = np.array([abs(dipolar_angular_factor(orientation_a.axis,
                                                   orientation_b.axis, d))
                        for d in dirs])
    ok = factors > 1e-12
    r = np.full(factors.shape, np.nan)
    r[ok] = (constants.dipolar_prefactor_hz_nm3 * factors[ok] / nu_dip_hz) ** (1.0 / 3.0)
    lateral = r * np.sqrt(dirs[:, 0] ** 2 + dirs[:, 1] ** 2)
    lat_max = np.nanmax(lateral)
    sel = ok & (np.abs(lateral - lateral_nm) <= lateral_tol_nm)
    if not np.any(sel):
        raise ValueError(
            f"lateral distance {lateral_nm} nm is inconsistent with the "
            f"coupling (maximum reachable lateral distance {lat_max:.2f} nm)")
    return float(np.min(r[sel])), float(np.max(r[sel]))


# --------------------------------------------------------------------------
# Image I/O
# --------------------------------------------------------------------------

_IMAGE_MAGIC = b"NVIM"


def save_image_csv(path, image: np.ndarray) -> None:
    np.savetxt(path, np.asarray(image, dtype=float), delimiter=",")


def load_image_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def save_image_binary(path, image: np.ndarray, pitch_nm: float) -> None:
    """Binary layout: magic 'NVIM', uint32 rows, uint32 cols, float64 pitch,
    then row-major float64 pixels."""
    img = np.ascontiguousarray(np.asarray(image, dtype="<f8"))
    with open(path, "wb") as fh:
        fh.write(_IMAGE_MAGIC)
        fh.write(struct.pack("<IId", img.shape[0], img.shape[1], pitch_nm))
        fh.write(img.tobytes())


def load_image_binary(path) -> tuple[np.ndarray, float]:
    with open(path, "rb") as fh:
        if fh.read(4) != _IMAGE_MAGIC:
            raise ValueError("not an image file (bad magic)")
        rows, cols, pitch = struct.unpack("<IId", fh.read(16))
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
    return data.reshape(rows, cols).copy(), float(pitch)
