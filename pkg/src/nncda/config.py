"""Run configuration: nested TOML file, presets and ``--set`` overrides."""

from __future__ import annotations

import copy
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

OUTPUT_ROOT_ENV = "NNCDA_OUTPUT_ROOT"
CFL_WARN = 0.5  # advective Courant number above which the CLI warns


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


PAPER = {
    "grid": {"n": 1024, "L": 2 * math.pi},
    "physics": {"nu": 0.008, "target_G": 250000.0, "forcing": {"seed": 0, "k_min": 16, "k_max": 64}},
    "da": {"mode": "nonlinear", "mu": 2.0, "beta": 2.0, "gamma": 0.1,
           "interpolant": {"kind": "fourier_projection", "m": 32}, "observe_every": 1},
    "time": {"dt": 3.125e-4, "t_spinup": 240.0, "t_end": 5.0, "sample_every": 160},
    "theory": {"c": 1.0, "eps": 1e-10, "T_window": 0.0},
    "io": {"output_dir": "paper", "checkpoint_every": 0},
}

DESK = {
    "grid": {"n": 128, "L": 2 * math.pi},
    "physics": {"nu": 0.02, "target_G": 50000.0, "forcing": {"seed": 0, "k_min": 8, "k_max": 24}},
    "da": {"mode": "nonlinear", "mu": 2.0, "beta": 2.0, "gamma": 0.1,
           "interpolant": {"kind": "fourier_projection", "m": 16}, "observe_every": 1},
    "time": {"dt": 1e-3, "t_spinup": 50.0, "t_end": 8.0, "sample_every": 50},
    "theory": {"c": 1.0, "eps": 1e-10, "T_window": 0.0},
    "io": {"output_dir": "desk", "checkpoint_every": 0},
}

PRESETS = {"paper": PAPER, "desk": DESK}

_POSITIVE = [("grid", "L"), ("physics", "nu"), ("time", "dt"), ("theory", "c"), ("theory", "eps")]
_NONNEG = [("physics", "target_G"), ("da", "mu"), ("da", "beta"), ("time", "t_spinup"), ("time", "t_end"),
           ("theory", "T_window"), ("io", "checkpoint_every")]


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _unknown_keys(ref: dict, data: dict, prefix: str = "") -> list:
    bad = []
    for k, v in data.items():
        if k not in ref:
            bad.append(prefix + k)
        elif isinstance(v, dict) and isinstance(ref[k], dict):
            bad += _unknown_keys(ref[k], v, prefix + k + ".")
    return bad


@dataclass
class RunConfig:
    """Validated experiment configuration backed by a nested dict."""

    data: dict

    def __post_init__(self):
        self.validate()

    def __getitem__(self, section: str) -> dict:
        return self.data[section]

    def get(self, dotted: str):
        node = self.data
        for part in dotted.split("."):
            node = node[part]
        return node

    def validate(self) -> None:
        d = self.data
        bad = _unknown_keys(DESK, d)
        if "m" in d.get("da", {}).get("interpolant", {}) or "h" in d.get("da", {}).get("interpolant", {}):
            bad = [b for b in bad if b not in ("da.interpolant.h", "da.interpolant.m")]
        if bad:
            raise ConfigError(f"unknown config keys: {', '.join(bad)}")
        try:
            for sec, key in _POSITIVE:
                if not float(d[sec][key]) > 0:
                    raise ConfigError(f"{sec}.{key} must be positive, got {d[sec][key]}")
            for sec, key in _NONNEG:
                if float(d[sec][key]) < 0:
                    raise ConfigError(f"{sec}.{key} must be nonnegative, got {d[sec][key]}")
            n = d["grid"]["n"]
            if not isinstance(n, int) or n < 8 or n % 2:
                raise ConfigError(f"grid.n must be an even integer >= 8, got {n!r}")
            f = d["physics"]["forcing"]
            if not 0 < f["k_min"] < f["k_max"] or 3 * f["k_max"] >= n:
                raise ConfigError(f"forcing band must satisfy 0 < k_min < k_max < n/3, got [{f['k_min']}, {f['k_max']}]")
            da = d["da"]
            if da["mode"] not in ("linear", "nonlinear", "capped"):
                raise ConfigError(f"da.mode must be linear, nonlinear or capped, got {da['mode']!r}")
            if not 0 <= float(da["gamma"]) < 1:
                raise ConfigError(f"da.gamma must lie in [0, 1), got {da['gamma']}")
            if int(da["observe_every"]) < 1 or int(d["time"]["sample_every"]) < 1:
                raise ConfigError("da.observe_every and time.sample_every must be >= 1")
            interp = da["interpolant"]
            if interp["kind"] not in ("fourier_projection", "volume_average"):
                raise ConfigError(f"unknown interpolant kind {interp['kind']!r}")
            if ("m" in interp) == ("h" in interp):
                raise ConfigError("da.interpolant needs exactly one of m or h")
        except KeyError as exc:
            raise ConfigError(f"missing config key {exc}") from exc

    def to_toml(self) -> str:
        return tomli_w.dumps(self.data)

    def save(self, path) -> None:
        Path(path).write_text(self.to_toml())

    def with_overrides(self, overrides: list[str]) -> "RunConfig":
        data = copy.deepcopy(self.data)
        for item in overrides:
            key, sep, raw = item.partition("=")
            if not sep or not key.strip():
                raise ConfigError(f"override {item!r} is not of the form key=value")
            node = data
            parts = key.strip().split(".")
            for p in parts[:-1]:
                if not isinstance(node.get(p), dict):
                    raise ConfigError(f"override key {key!r} does not name a config entry")
                node = node[p]
            node[parts[-1]] = parse_value(raw.strip())
        return RunConfig(data)

    def output_dir(self) -> Path:
        out = Path(self.data["io"]["output_dir"])
        root = os.environ.get(OUTPUT_ROOT_ENV)
        return out if out.is_absolute() or not root else Path(root) / out


def parse_value(raw: str):
    """Parse an override value as a TOML literal, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def preset(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return RunConfig(copy.deepcopy(PRESETS[name]))


def load(path) -> RunConfig:
    """Read a TOML file; missing sections fall back to the desk preset."""
    try:
        with open(Path(path), "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    base = copy.deepcopy(DESK)
    if "m" in data.get("da", {}).get("interpolant", {}) or "h" in data.get("da", {}).get("interpolant", {}):
        base["da"]["interpolant"].pop("m", None)
    return RunConfig(_merge(base, data))


def loads(text: str) -> RunConfig:
    return RunConfig(tomllib.loads(text))
