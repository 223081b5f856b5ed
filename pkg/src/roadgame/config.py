"""Experiment configuration: one INI file with [dynamics], [grid], [learn] and [synth].

Every key is optional.  Command-line flags override file values.  Grid
bounds default to the scenario's lanelet bounding box.  See docs/config.md.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from typing import Optional

from .dynamics import DynamicsParams
from .errors import ConfigError
from .learning import LearnConfig

_DYNAMICS = {f.name: f.type for f in fields(DynamicsParams)}
_LEARN = {f.name: f.type for f in fields(LearnConfig)}
_GRID_INT = ("nx", "ny", "ntheta", "nv", "horizon")
_GRID_FLOAT = ("x_min", "x_max", "y_min", "y_max", "sample_xy", "sample_theta", "raster")
_GRID_BOOL = ("rest_cell",)
_SYNTH = ("mode",)


@dataclass
class Config:
    dynamics: DynamicsParams = field(default_factory=DynamicsParams)
    learn: LearnConfig = field(default_factory=LearnConfig)
    grid: dict = field(default_factory=dict)   # GridSpec overrides, bounds as x_min/x_max/...
    mode: str = "corners"

    def grid_spec(self, sc):
        from .game import GridSpec

        kw = {k: v for k, v in self.grid.items() if k not in ("x_min", "x_max", "y_min", "y_max")}
        for name, lo, hi in (("x_bounds", "x_min", "x_max"), ("y_bounds", "y_min", "y_max")):
            if lo in self.grid or hi in self.grid:
                base = GridSpec.for_scenario(sc, self.dynamics)
                cur = getattr(base, name)
                kw[name] = (self.grid.get(lo, cur[0]), self.grid.get(hi, cur[1]))
        try:
            return GridSpec.for_scenario(sc, self.dynamics, **kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[grid]: {exc}") from None


def _convert(section, key, raw, kind):
    try:
        if kind in (int, "int"):
            return int(raw)
        if kind in (bool, "bool"):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind in ("Optional[int]",):
            return None if raw.strip().lower() in ("", "none") else int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None


def _typed(section: str, values: dict, schema: dict) -> dict:
    out = {}
    for key, raw in values.items():
        if key not in schema:
            raise ConfigError(f"[{section}] unknown key {key!r}")
        out[key] = _convert(section, key, raw, schema[key])
    return out


def parse_config(text: str) -> dict:
    """INI text to a nested dict of typed values, validating keys."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    out = {}
    for section in cp.sections():
        values = dict(cp[section])
        if section == "dynamics":
            out[section] = _typed(section, values, _DYNAMICS)
        elif section == "learn":
            out[section] = _typed(section, values, _LEARN)
        elif section == "grid":
            schema = {k: int for k in _GRID_INT}
            schema.update({k: float for k in _GRID_FLOAT})
            schema.update({k: bool for k in _GRID_BOOL})
            out[section] = _typed(section, values, schema)
        elif section == "synth":
            for key in values:
                if key not in _SYNTH:
                    raise ConfigError(f"[synth] unknown key {key!r}")
            if "mode" in values and values["mode"] not in ("center", "corners"):
                raise ConfigError(f"[synth] mode must be 'center' or 'corners', got {values['mode']!r}")
            out[section] = values
        else:
            raise ConfigError(f"unknown section [{section}]")
    return out


def build_config(data: Optional[dict] = None, overrides: Optional[dict] = None) -> Config:
    """Merge parsed file data with flag overrides (``{"learn": {"episodes": 10}, ...}``)."""
    merged = {s: dict(v) for s, v in (data or {}).items()}
    for section, values in (overrides or {}).items():
        merged.setdefault(section, {}).update({k: v for k, v in values.items() if v is not None})
    try:
        dyn = replace(DynamicsParams(), **merged.get("dynamics", {}))
        learn = replace(LearnConfig(), **merged.get("learn", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    mode = merged.get("synth", {}).get("mode", "corners")
    return Config(dyn, learn, merged.get("grid", {}), mode)


def load_config(path=None, overrides: Optional[dict] = None) -> Config:
    data = None
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = parse_config(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc.strerror}") from None
    return build_config(data, overrides)
