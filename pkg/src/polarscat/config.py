"""Run configuration: YAML loading, presets, validation, scenario assembly.

Orientations in config files are ``[theta_deg, phi_deg]`` pairs: tilt from
vertical first, azimuth second. All lengths are meters, powers watts,
frequencies hertz, SNRs decibels.
"""

from __future__ import annotations

import copy
import math
from typing import Any

import numpy as np
import yaml

from . import channel as chan
from .channel import Pose, Scenario, derived_rng, sample_scatterers
from .polarization import Orientation
from .tags import NR_PRESETS, TAG_KINDS, TagModel, build_tag


class ConfigError(ValueError):
    """Configuration defect; the message starts with the offending key path."""


PRESET_NAMES = (
    "los-nr-best",
    "los-nr-worst",
    "los-4pr",
    "los-ipr",
    "scat-nr-best",
    "scat-nr-worst",
    "scat-4pr",
    "scat-ipr",
)

# Reference deployment: vertical source far from a cross-polarized reader,
# candidate tag positions around the reader.
_BASE = {
    "seed": 0,
    "frequency_hz": 2.4e9,
    "snr_tx_db": 116.0,
    "tx_power_w": 1.0,
    "source_position": [0.0, 0.0, 0.3],
    "source_orientation_deg": [0.0, 0.0],
    "reader_position": [100.0, 0.0, 0.3],
    "reader_orientation_deg": [90.0, 90.0],
    "tag_position": [99.75, 0.15, 0.3],
    "tag_orientation_deg": None,
    "n_scatterers": 0,
    "scatterer_length_m": None,  # default: half a wavelength
    "scatterer_gain": 1.0,
    "ground_plane": False,
    "tag_scatter_bounce": False,
    "ber_target": 1e-2,
    "backscatter_gain": 1.0,
    "tag_kind": "nr",
    "nr_preset": "best",
    "detector": "ed",
    "map": {
        "x_range": None,  # default: reader-centered square
        "y_range": None,
        "step_m": 0.005,
        "z_m": None,
        "half_extent_m": 0.4,
        "n_bits": 400,
        "n_train": 64,
        "lse_analytic": False,
    },
    "outage": {
        "snr_db": {"start": 100.0, "stop": 150.0, "step": 2.0},
        "axis": "tx",
        "step_m": 0.02,
        "tags": None,  # default: the configured tag only
        "detectors": None,  # default: the configured detector only
        "n_bits": 400,
        "n_train": 64,
        "lse_analytic": False,
    },
    "optimum": {
        "reader_step_deg": 10.0,
        "tag_step_deg": 1.0,
    },
    "pcs": {
        "channel_file": None,
        "pairs": ["2:1", "3:1", "4:1", "3:2", "4:2", "4:3"],
        "snr_captured_db": {"start": 0.0, "stop": 20.0, "step": 2.0},
        "n_bits": 10000,
        "n_train": 64,
        "synthetic": None,  # e.g. {rho: 0.5, n_states: 4, sigma: 1.0, realizations: 100}
    },
}

_TAG_ALIASES = {"nr-best": ("nr", "best"), "nr-worst": ("nr", "worst"), "4pr": ("4pr", None), "ipr": ("ipr", None)}


def preset(name: str) -> dict:
    """Named scenario presets: LOS or scattering environment x tag model."""
    if name not in PRESET_NAMES:
        raise ConfigError(f"preset: unknown preset {name!r}, expected one of {list(PRESET_NAMES)}")
    cfg = copy.deepcopy(_BASE)
    env, tag = name.split("-", 1)
    if env == "scat":
        cfg["n_scatterers"] = 20
        cfg["ground_plane"] = True
    kind, nr = _TAG_ALIASES[tag]
    cfg["tag_kind"] = kind
    if nr is not None:
        cfg["nr_preset"] = nr
    return cfg


def default_config() -> dict:
    return copy.deepcopy(_BASE)


_SECTIONS = ("map", "outage", "optimum", "pcs")


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key == "preset":
            continue
        if key not in base:
            raise ConfigError(f"{where}: unknown key")
        if not path and key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"{where}: expected a mapping")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | None = None, preset_name: str | None = None, overrides: dict | None = None) -> dict:
    """Resolve a full configuration from an optional YAML file, preset and overrides.

    Precedence: file values override the preset, explicit overrides win.
    The file may itself carry a ``preset`` key.
    """
    raw: dict[str, Any] = {}
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        raw = loaded
    if preset_name is None:
        preset_name = raw.get("preset")
    base = preset(preset_name) if preset_name else default_config()
    cfg = _merge(base, raw)
    if overrides:
        cfg = _merge(cfg, overrides)
    validate_config(cfg)
    return cfg


def _require_number(cfg: dict, key: str, positive: bool = False) -> None:
    value = cfg.get(key)
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise ConfigError(f"{key}: expected a finite number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"{key}: must be positive, got {value!r}")


def _require_vec3(cfg: dict, key: str) -> None:
    value = cfg.get(key)
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"{key}: expected [x, y, z]")
    if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in value):
        raise ConfigError(f"{key}: coordinates must be finite numbers")


def _require_orientation(cfg: dict, key: str, optional: bool = False) -> None:
    value = cfg.get(key)
    if value is None and optional:
        return
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{key}: expected [theta_deg, phi_deg]")
    theta = value[0]
    if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in value):
        raise ConfigError(f"{key}: angles must be finite numbers")
    if not 0.0 <= float(theta) <= 180.0:
        raise ConfigError(f"{key}: theta_deg must lie in [0, 180]")


def validate_config(cfg: dict) -> None:
    _require_number(cfg, "frequency_hz", positive=True)
    _require_number(cfg, "snr_tx_db")
    _require_number(cfg, "tx_power_w", positive=True)
    _require_number(cfg, "ber_target", positive=True)
    _require_vec3(cfg, "source_position")
    _require_vec3(cfg, "reader_position")
    _require_vec3(cfg, "tag_position")
    _require_orientation(cfg, "source_orientation_deg")
    _require_orientation(cfg, "reader_orientation_deg")
    _require_orientation(cfg, "tag_orientation_deg", optional=True)
    if not isinstance(cfg.get("n_scatterers"), int) or cfg["n_scatterers"] < 0:
        raise ConfigError(f"n_scatterers: expected a non-negative integer, got {cfg.get('n_scatterers')!r}")
    if cfg.get("scatterer_length_m") is not None:
        _require_number(cfg, "scatterer_length_m", positive=True)
    _require_number(cfg, "scatterer_gain")
    _require_number(cfg, "backscatter_gain")
    for key in ("ground_plane", "tag_scatter_bounce"):
        if not isinstance(cfg.get(key), bool):
            raise ConfigError(f"{key}: expected true or false")
    if not isinstance(cfg.get("seed"), int):
        raise ConfigError(f"seed: expected an integer, got {cfg.get('seed')!r}")
    if cfg.get("tag_kind") not in TAG_KINDS[:3]:
        raise ConfigError(f"tag_kind: expected one of {list(TAG_KINDS[:3])}, got {cfg.get('tag_kind')!r}")
    if cfg.get("nr_preset") not in NR_PRESETS:
        raise ConfigError(f"nr_preset: expected one of {sorted(NR_PRESETS)}, got {cfg.get('nr_preset')!r}")
    if cfg.get("detector") not in ("ed", "lse"):
        raise ConfigError(f"detector: expected 'ed' or 'lse', got {cfg.get('detector')!r}")
    _require_number(cfg["map"], "step_m", positive=True)
    _require_number(cfg["outage"], "step_m", positive=True)
    if cfg["outage"]["axis"] not in ("tx", "captured"):
        raise ConfigError(f"outage.axis: expected 'tx' or 'captured', got {cfg['outage']['axis']!r}")


def snr_axis(spec, key: str = "outage.snr_db") -> np.ndarray:
    """SNR axis from either an explicit list or a {start, stop, step} mapping."""
    if isinstance(spec, (list, tuple)):
        if len(spec) == 0:
            raise ConfigError(f"{key}: axis must be non-empty")
        return np.asarray([float(v) for v in spec])
    if isinstance(spec, dict):
        try:
            start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        except KeyError as exc:
            raise ConfigError(f"{key}: missing {exc.args[0]!r}") from None
        if step <= 0 or stop < start:
            raise ConfigError(f"{key}: need stop >= start and step > 0")
        return np.arange(start, stop + 0.5 * step, step)
    raise ConfigError(f"{key}: expected a list or a start/stop/step mapping")


def orientation_from_config(pair) -> Orientation:
    return Orientation.from_degrees(float(pair[0]), float(pair[1]))


def build_scenario(cfg: dict, seed: int | None = None) -> Scenario:
    """Assemble the scenario, sampling scatterers deterministically from the seed.

    Noise power is derived from the configured transmit power and
    transmit-referenced SNR; only their ratio affects any result.
    """
    if seed is None:
        seed = cfg["seed"]
    source = Pose(np.asarray(cfg["source_position"], dtype=float), orientation_from_config(cfg["source_orientation_deg"]))
    reader = Pose(np.asarray(cfg["reader_position"], dtype=float), orientation_from_config(cfg["reader_orientation_deg"]))
    tag_orientation = (
        orientation_from_config(cfg["tag_orientation_deg"])
        if cfg.get("tag_orientation_deg") is not None
        else Orientation.from_degrees(*NR_PRESETS[cfg["nr_preset"]])
    )
    tag = Pose(np.asarray(cfg["tag_position"], dtype=float), tag_orientation)

    frequency = float(cfg["frequency_hz"])
    wavelength = chan.SPEED_OF_LIGHT / frequency
    tx_power = float(cfg["tx_power_w"])
    noise_power = tx_power / 10.0 ** (float(cfg["snr_tx_db"]) / 10.0)

    scatterers = []
    if cfg["n_scatterers"] > 0:
        scatterers = sample_scatterers(
            derived_rng(seed, 0),
            int(cfg["n_scatterers"]),
            wavelength=wavelength,
            reader_position=reader.position,
            antenna_positions=[source.position, tag.position, reader.position],
            length=cfg.get("scatterer_length_m"),
            complex_gain=complex(cfg.get("scatterer_gain", 1.0)),
        )

    return Scenario(
        source=source,
        reader=reader,
        tag=tag,
        scatterers=scatterers,
        ground_plane=bool(cfg["ground_plane"]),
        frequency_hz=frequency,
        tx_power_w=tx_power,
        noise_power_w=noise_power,
        backscatter_gain=complex(cfg.get("backscatter_gain", 1.0)),
        rng_seed=int(seed),
        tag_scatter_bounce=bool(cfg["tag_scatter_bounce"]),
    )


def build_tag_from_config(cfg: dict, tag_name: str | None = None) -> TagModel:
    """Tag model from the config, or from a short alias like 'nr-best' / '4pr' / 'ipr'."""
    if tag_name is None:
        kind, nr = cfg["tag_kind"], cfg["nr_preset"]
    else:
        if tag_name not in _TAG_ALIASES:
            raise ConfigError(f"outage.tags: unknown tag {tag_name!r}, expected one of {sorted(_TAG_ALIASES)}")
        kind, nr = _TAG_ALIASES[tag_name]
        nr = nr or "best"
    if cfg.get("tag_orientation_deg") is not None and kind == "nr" and tag_name is None:
        return build_tag("nr", orientation=orientation_from_config(cfg["tag_orientation_deg"]))
    return build_tag(kind, nr_preset=nr or "best")


def map_grid_from_config(cfg: dict):
    from .experiments import MapGrid

    mcfg = cfg["map"]
    reader = cfg["reader_position"]
    half = float(mcfg.get("half_extent_m") or 0.4)
    x_range = mcfg.get("x_range") or [reader[0] - half, reader[0] + half]
    y_range = mcfg.get("y_range") or [reader[1] - half, reader[1] + half]
    z = mcfg.get("z_m")
    if z is None:
        z = reader[2]
    return MapGrid(
        x_range=(float(x_range[0]), float(x_range[1])),
        y_range=(float(y_range[0]), float(y_range[1])),
        step=float(mcfg["step_m"]),
        z=float(z),
    )
