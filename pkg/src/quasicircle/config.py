"""Experiment configuration: a versioned JSON schema with line-anchored errors."""
from __future__ import annotations

import copy
import hashlib
import json
import re

from .errors import ConfigError

SCHEMA_VERSION = 1

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "output": "reports",
    "group": {"kappa0": None},
    "metric": {"n_bumps": 2, "centers": None, "r1": None, "r2": None, "t": None},
    "entropy": {"R_max": None, "step": 0.25, "min_span": 3.0, "max_residual": 0.1},
    "boundary": {
        "T": 10.0,
        "variant": "gromov",
        "m": 4000,
        "scales": [0.25, 0.125, 0.0625, 0.03125, 0.015625],
        "n_arcs": 1000,
        "n_pairs": 8,
        "fit_scales": [0.0625, 0.03125, 0.015625],
        "heldout_scale": 0.0078125,
    },
    "family": {
        "k": 0,
        "v": None,
        "steps": 3,
        "step": None,
        "tol_F": None,
        "tol_A": 1e-4,
        "R_max": 8.0,
        "census_step": 0.01,
        "window": [4.0, 8.0],
    },
    "gap": {"s1": 1.0, "s2": 2**0.5},
}

# kappa0 used when the config leaves it unset
SUBCOMMAND_KAPPA = {"entropy": -1.0, "hdim": -1.0, "qcheck": -1.0, "family": -2.0, "gap": -1.0, "validate": -1.0}
SUBCOMMAND_RMAX = {-1.0: 12.0, -2.0: 9.0}

_TYPES = {
    "schema_version": int,
    "seed": int,
    "output": str,
}


def _line_of(text, key):
    """1-based line of the first occurrence of a JSON key, else 1."""
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


def _merge(base, upd, text, path=""):
    for k, v in upd.items():
        where = f"{path}{k}"
        if k not in base:
            raise ConfigError(f"unknown key '{where}'", line=_line_of(text, k))
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"'{where}' must be an object", line=_line_of(text, k))
            _merge(base[k], v, text, where + ".")
        else:
            base[k] = v


def _positive(cfg, text, section, key):
    v = cfg[section][key]
    if v is not None and not (isinstance(v, (int, float)) and v > 0):
        raise ConfigError(f"'{section}.{key}' must be positive", line=_line_of(text, key))


def validate(cfg, text=""):
    for k, typ in _TYPES.items():
        if not isinstance(cfg[k], typ) or isinstance(cfg[k], bool):
            raise ConfigError(f"'{k}' must be of type {typ.__name__}", line=_line_of(text, k))
    if cfg["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {cfg['schema_version']}", line=_line_of(text, "schema_version"))
    if cfg["seed"] < 0 or cfg["seed"] >= 2**64:
        raise ConfigError("'seed' must be an unsigned 64-bit integer", line=_line_of(text, "seed"))
    k0 = cfg["group"]["kappa0"]
    if k0 is not None and not (isinstance(k0, (int, float)) and k0 < 0):
        raise ConfigError("'group.kappa0' must be negative", line=_line_of(text, "kappa0"))
    for sec, key in [
        ("entropy", "R_max"), ("entropy", "step"), ("entropy", "min_span"), ("entropy", "max_residual"),
        ("boundary", "T"), ("boundary", "m"), ("boundary", "n_arcs"), ("boundary", "n_pairs"),
        ("boundary", "heldout_scale"), ("family", "step"), ("family", "tol_F"), ("family", "tol_A"),
        ("family", "R_max"), ("family", "census_step"), ("gap", "s1"), ("gap", "s2"),
    ]:
        _positive(cfg, text, sec, key)
    if cfg["boundary"]["variant"] not in ("gromov", "geodesic"):
        raise ConfigError("'boundary.variant' must be 'gromov' or 'geodesic'", line=_line_of(text, "variant"))
    steps = cfg["family"]["steps"]
    if not isinstance(steps, int) or steps < 0:
        raise ConfigError("'family.steps' must be a nonnegative integer", line=_line_of(text, "steps"))
    if cfg["family"]["k"] not in (0, 1, 2, 3):
        raise ConfigError("'family.k' must be between 0 and 3", line=_line_of(text, "k"))
    n = cfg["metric"]["n_bumps"]
    if not isinstance(n, int) or n < 1:
        raise ConfigError("'metric.n_bumps' must be a positive integer", line=_line_of(text, "n_bumps"))
    for key in ("scales", "fit_scales"):
        vals = cfg["boundary"][key]
        if not isinstance(vals, list) or not vals or any(not isinstance(x, (int, float)) or x <= 0 for x in vals):
            raise ConfigError(f"'boundary.{key}' must be a list of positive numbers", line=_line_of(text, key))
    return cfg


def load_config(text):
    """Parse and validate config text (JSON); returns a full config dict."""
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object", line=1)
    cfg = copy.deepcopy(DEFAULTS)
    _merge(cfg, data, text)
    return validate(cfg, text)


def config_hash(cfg):
    """sha256 of the canonical config; the output location is not part of it."""
    body = {k: v for k, v in cfg.items() if k != "output"}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
