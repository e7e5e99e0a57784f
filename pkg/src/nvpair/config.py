"""Experiment configuration, run manifests, and deterministic CSV output.

Configs are JSON with a strict schema (unknown keys rejected).  CSV files are
written with a header row and 17-significant-digit floats so reruns with the
same (config, seed) are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .noise import NoisePreset
from .observables import ChargeModel, MeasurementModel
from .photons import EmissionModel
from .system import SpinSystem, reference_system

PACKAGE_VERSION = "0.1.0"


class ConfigError(Exception):
    """Configuration failure with a machine-readable error code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message

    def to_json(self) -> str:
        return json.dumps({"code": self.code, "message": self.message})


_NOISE_PRESET_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["t2_star_s", "t2_s"],
    "properties": {
        "t2_star_s": {"type": "number", "exclusiveMinimum": 0},
        "t2_s": {"type": "number", "exclusiveMinimum": 0},
        "kind": {"enum": ["quasi-static", "ornstein-uhlenbeck"]},
        "tau_c_s": {"type": ["number", "null"]},
        "hahn_exponent": {"type": "number"},
        "delta_ms_ref": {"type": "integer", "enum": [1, 2]},
    },
}

_SYSTEM_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "delta_hz": {"type": "number"},
        "a_n_hz": {"type": "number"},
        "gamma_e_hz_per_g": {"type": "number"},
        "gamma_n_hz_per_g": {"type": "number"},
        "dipolar_prefactor_hz_nm3": {"type": "number"},
        "axes": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "A": {"type": "array", "items": {"type": "number"},
                      "minItems": 3, "maxItems": 3},
                "B": {"type": "array", "items": {"type": "number"},
                      "minItems": 3, "maxItems": 3},
            },
        },
        "field_gauss": {"type": "number"},
        "field_polar_deg": {"type": "number"},
        "field_azimuth_deg": {"type": "number"},
        "nu_dip_hz": {"type": "number"},
        "geometry": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "properties": {
                "r_ab_nm": {"type": "number"},
                "n_ab": {"type": "array", "items": {"type": "number"},
                         "minItems": 3, "maxItems": 3},
            },
        },
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "system": _SYSTEM_SCHEMA,
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"a": _NOISE_PRESET_SCHEMA, "b": _NOISE_PRESET_SCHEMA},
        },
        "measurement": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "alpha": {"type": "number"},
                "beta": {"type": "number"},
                "offset": {"type": "number"},
                "scale": {"type": "number"},
            },
        },
        "charge": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "p_minus": {"type": "number"},
                "bright_rate_hz": {"type": "number"},
                "dark_rate_hz": {"type": "number"},
                "window_s": {"type": "number"},
                "threshold": {"type": "integer"},
            },
        },
        "emission": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "k0": {"type": "number"},
                "k1": {"type": "number"},
                "tau_bright_s": {"type": "number"},
                "tau_dark_s": {"type": "number"},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "out_dir": {"type": "string"},
        "trajectories": {"type": "integer", "minimum": 1},
        "threads": {"type": "integer", "minimum": 1},
        "odmr": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "f_min_hz": {"type": "number"},
                "f_max_hz": {"type": "number"},
                "n_points": {"type": "integer", "minimum": 16},
                "linewidth_hz": {"type": "number", "exclusiveMinimum": 0},
                "contrast": {"type": "number"},
            },
        },
        "deer": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["sq", "dq"]},
                "tau_max_s": {"type": "number", "exclusiveMinimum": 0},
                "n_points": {"type": "integer", "minimum": 16},
            },
        },
        "entangle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_points": {"type": "integer", "minimum": 16},
                "gate": {"enum": ["dq", "sq"]},
            },
        },
        "tomography": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "l_second": {"type": "number", "exclusiveMinimum": 0},
                "sigma": {"type": "number", "minimum": 0},
            },
        },
        "lifetime": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t_max_s": {"type": "number", "exclusiveMinimum": 0},
                "correlated_t_max_s": {"type": "number", "exclusiveMinimum": 0},
                "carrier_hz": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "swap": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t_max_s": {"type": "number", "exclusiveMinimum": 0},
                "n_points": {"type": "integer", "minimum": 4},
                "t1_s": {"type": "number", "exclusiveMinimum": 0},
                "nuclear_t2star_s": {"type": "number", "exclusiveMinimum": 0},
                "pulse_contrast": {"type": "number",
                                   "exclusiveMinimum": 0, "maximum": 1},
                "angle_deg": {"type": "number"},
                "b_gauss": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "photon_corr": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "shots": {"type": "integer", "minimum": 1},
                "gate_ns": {"type": "number", "minimum": 0},
                "bin_width_ns": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "implant": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_ions": {"type": "integer", "minimum": 2},
                "threshold_nm": {"type": "number", "exclusiveMinimum": 0},
                "aperture_width_nm": {"type": "number", "exclusiveMinimum": 0},
                "aperture_height_nm": {"type": "number", "exclusiveMinimum": 0},
                "straggle_nm": {"type": "number", "exclusiveMinimum": 0},
                "straggle_table": {"type": "string"},
            },
        },
        "localize": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "separation_nm": {"type": "number", "exclusiveMinimum": 0},
                "repetitions": {"type": "integer", "minimum": 1},
                "counts_scale": {"type": "number", "minimum": 0},
                "n_pixels": {"type": "integer", "minimum": 16},
                "pitch_nm": {"type": "number", "exclusiveMinimum": 0},
                "psf_sigma_x_nm": {"type": "number", "exclusiveMinimum": 0},
                "psf_sigma_y_nm": {"type": "number", "exclusiveMinimum": 0},
                "contrast_a": {"type": "number"},
                "contrast_b": {"type": "number"},
            },
        },
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment configuration plus the raw file hash."""

    raw: dict
    sha256: str = ""

    def system(self) -> SpinSystem:
        if "system" in self.raw:
            return SpinSystem.from_json_dict(self.raw["system"])
        return reference_system()

    def noise(self, which: str) -> NoisePreset | None:
        d = self.raw.get("noise", {}).get(which)
        return NoisePreset.from_json_dict(d) if d is not None else None

    def measurement(self) -> MeasurementModel:
        return MeasurementModel(**self.raw.get("measurement", {}))

    def charge(self) -> ChargeModel:
        return ChargeModel(**self.raw.get("charge", {}))

    def emission(self) -> EmissionModel:
        d = dict(self.raw.get("emission", {}))
        d.setdefault("k0", 0.4)
        d.setdefault("k1", 0.2)
        return EmissionModel(**d)

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    @property
    def out_dir(self) -> str:
        return self.raw.get("out_dir", ".")

    @property
    def trajectories(self) -> int:
        return int(self.raw.get("trajectories", 4000))

    @property
    def threads(self) -> int:
        return int(self.raw.get("threads", 1))

    def section(self, name: str) -> dict:
        return dict(self.raw.get(name, {}))


def validate_config_dict(raw: dict) -> None:
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError("config_invalid",
                          f"config schema violation at {path}: {exc.message}")


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Load and schema-validate a JSON config; ``None`` gives the defaults."""
    if path is None:
        return ExperimentConfig({}, hashlib.sha256(b"{}").hexdigest())
    p = Path(path)
    if not p.is_file():
        raise ConfigError("config_not_found", f"config file not found: {p}")
    data = p.read_bytes()
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ConfigError("config_invalid", f"config is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config_invalid", "config root must be a JSON object")
    validate_config_dict(raw)
    return ExperimentConfig(raw, hashlib.sha256(data).hexdigest())


# --------------------------------------------------------------------------
# Deterministic CSV output and the run manifest
# --------------------------------------------------------------------------

def format_float(x: float) -> str:
    return f"{x:.17g}"


def format_csv(stream, header, rows) -> None:
    """Write header + rows with fixed float formatting and LF newlines."""
    stream.write(",".join(header) + "\n")
    for row in rows:
        stream.write(",".join(
            format_float(v) if isinstance(v, float) else str(v)
            for v in row) + "\n")


def write_csv(path: str | Path, header, rows) -> Path:
    p = Path(path)
    with open(p, "w", newline="\n") as fh:
        format_csv(fh, header, rows)
    return p


@dataclass
class RunManifest:
    """Provenance record emitted next to every command's outputs."""

    command: str
    config_sha256: str
    seed: int
    version: str = PACKAGE_VERSION
    files: list[str] = field(default_factory=list)

    def add(self, path: str | Path) -> None:
        self.files.append(Path(path).name)

    def write(self, out_dir: str | Path) -> Path:
        p = Path(out_dir) / "manifest.json"
        payload = {
            "command": self.command,
            "config_sha256": self.config_sha256,
            "seed": self.seed,
            "version": self.version,
            "files": sorted(self.files),
        }
        with open(p, "w", newline="\n") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return p
