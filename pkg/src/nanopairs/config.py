"""Run configuration: YAML documents with fixed sections and strict keys."""
from __future__ import annotations

import copy
import json
from pathlib import Path

import yaml

__all__ = ["ConfigError", "DEFAULTS", "SECTIONS", "load_config", "apply_override", "resolve", "dump"]

SECTIONS = ("geometry", "materials", "solver", "sfg", "spdc", "detection", "output")


class ConfigError(ValueError):
    """Bad configuration or command line; maps to exit code 2."""


DEFAULTS: dict = {
    "seed": 0,
    "geometry": {
        "shape": "cylinder",
        "diameter_nm": 430.0,
        "height_nm": 400.0,
        "radius_nm": None,
    },
    "materials": {
        "material": "algaas",
        "table": None,
        "constant_index": None,
        "background_index": 1.0,
        "d14_pm_per_v": 100.0,
        "crystal_rotation_deg": 0.0,
    },
    "solver": {
        "ir_grid_nm": [1400.0, 1700.0, 10.0],
        "pump_grid_nm": [744.0, 768.0, 2.0],
        "spacing_ir_nm": 15.0,
        "spacing_pump_nm": 16.0,
        "tol": 1e-6,
        "tol_pump": 1e-3,
        "max_iter": 20000,
        "method": "fft",
        "method_pump": "mirror",
        "fit_window_ir_nm": None,
        "fit_window_pump_nm": None,
        "excitation": "plane",
        "polarization": "H",
        "quadrupoles": True,
    },
    "sfg": {
        "lambda_s_nm": 1520.0,
        "lambda_i_nm": 1560.0,
        "waist_nm": 1000.0,
        "power_s_w": 1e-3,
        "power_i_w": 1e-3,
        "na": 0.7,
        "analyzer": "H",
        "n_theta": 32,
        "n_phi": 64,
        "image_pixels": 101,
        "images": True,
    },
    "spdc": {
        "lambda_p_nm": 785.0,
        "lambda_s_nm": None,
        "lambda_i_nm": None,
        "pump_power_w": 2e-3,
        "spot_diameter_m": 2e-6,
        "sfg_spot_diameter_m": None,
        "delta_lambda_nm": 150.0,
        "eta_per_w": 1.8e-5,
        "normalization_length_m": None,
    },
    "detection": {
        "pair_rate_hz": 35.0,
        "eta_arm": 0.01,
        "split": 0.5,
        "dark_rate_hz": 5.0,
        "delay_ns": 26.5,
        "bin_ps": 162.0,
        "bins": 300,
        "duration_s": 86400.0,
        "thermal_rate_hz": 300.0,
        "thermal_sigma_ns": 0.85,
        "jitter_ps": 50.0,
        "dead_time_us": 10.0,
        "tag_format": "ttg",
        "inputs": [],
    },
    "output": {
        "dir": "out",
        "write_tags": True,
    },
}


def _check_keys(doc: dict, ref: dict, where: str = "") -> None:
    if not isinstance(doc, dict):
        raise ConfigError(f"section {where or 'root'} must be a mapping")
    for key, val in doc.items():
        path = f"{where}.{key}" if where else str(key)
        if key not in ref:
            raise ConfigError(f"unknown configuration key '{path}'")
        if isinstance(ref[key], dict):
            _check_keys(val, ref[key], path)


def _merge(base: dict, doc: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in doc.items():
        if isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path=None) -> dict:
    """Defaults merged with the YAML document at ``path`` (unknown keys rejected)."""
    if path is None:
        return copy.deepcopy(DEFAULTS)
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    doc = {} if doc is None else doc
    _check_keys(doc, DEFAULTS)
    return _merge(DEFAULTS, doc)


def apply_override(cfg: dict, item: str) -> dict:
    """Apply one ``section.key=value`` override; the value is parsed as YAML."""
    if "=" not in item:
        raise ConfigError(f"override '{item}' is not of the form section.key=value")
    path, raw = item.split("=", 1)
    parts = path.strip().split(".")
    node, ref = cfg, DEFAULTS
    for p in parts[:-1]:
        if p not in ref or not isinstance(ref[p], dict):
            raise ConfigError(f"unknown configuration key '{path}'")
        node, ref = node[p], ref[p]
    if parts[-1] not in ref or isinstance(ref[parts[-1]], dict):
        raise ConfigError(f"unknown configuration key '{path}'")
    try:
        node[parts[-1]] = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse value in '{item}'") from exc
    return cfg


def _coerce_numbers(node: dict, ref: dict) -> None:
    # YAML 1.1 reads "1e-6" (no dot) as a string; accept it where a number is expected
    for key, val in node.items():
        default = ref.get(key)
        if isinstance(default, dict) and isinstance(val, dict):
            _coerce_numbers(val, default)
        elif isinstance(val, str) and isinstance(default, (int, float)) and not isinstance(default, bool):
            try:
                node[key] = float(val)
            except ValueError:
                raise ConfigError(f"configuration key '{key}' expects a number, got {val!r}") from None


def resolve(path=None, overrides=(), seed=None) -> dict:
    cfg = load_config(path)
    for item in overrides:
        apply_override(cfg, item)
    _coerce_numbers(cfg, DEFAULTS)
    if seed is not None:
        cfg["seed"] = seed
    s = cfg["seed"]
    if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return cfg


def dump(cfg: dict) -> str:
    """Canonical one-line JSON form (sorted keys) used for embedding in outputs."""
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))
