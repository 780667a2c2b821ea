"""Run configuration: plain-text `key = value` sections, fail-closed.

Unknown sections or keys are errors.  Serialization is canonical (fixed
section and key order, repr-exact floats), so parse -> serialize -> parse is
the identity and the config hash is stable.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

_SCHEMA = {
    "grid": {"n": int, "length": float},
    "physics": {"nu": float, "m1": float, "m2": float, "eps": float, "q": float},
    "scenario": {
        "name": str,
        "disc_center_x": float, "disc_center_y": float, "disc_radius": float,
        "annulus_r_inner": float, "annulus_r_outer": float,
        "n_markers": int,
    },
    "stepper": {
        "scheme": str, "dt": float, "cfl": float, "t_end": float,
        "theta_advection": str, "x_mode": str, "mollifier_cells": float,
    },
    "outputs": {
        "record_every": int, "snapshot_every": int, "markers_every": int,
        "directory": str, "fields": str,
    },
    "seeds": {"main": int},
}

_DEFAULTS = {
    "grid": {"n": 256, "length": 2.0 * np.pi},
    "physics": {"nu": 1.0, "m1": 1.0, "m2": 1.0, "eps": 0.5, "q": 1.3},
    "scenario": {
        "name": "disc_patch",
        "disc_center_x": np.pi, "disc_center_y": np.pi, "disc_radius": 0.75,
        "annulus_r_inner": 1.45, "annulus_r_outer": 2.0,
        "n_markers": 4096,
    },
    "stepper": {
        "scheme": "ifrk2", "dt": 2e-3, "cfl": 0.4, "t_end": 1.0,
        "theta_advection": "semi_lagrangian", "x_mode": "gradient_perp",
        "mollifier_cells": 2.0,
    },
    "outputs": {
        "record_every": 1, "snapshot_every": 1, "markers_every": 0,
        "directory": "out", "fields": "theta,omega,u,x,levelset",
    },
    "seeds": {"main": 12345},
}

FIELD_ORDER = ("theta", "omega", "u", "x", "levelset")


@dataclass
class Config:
    sections: dict = field(default_factory=lambda: {
        sec: dict(vals) for sec, vals in _DEFAULTS.items()})

    def get(self, section, key):
        return self.sections[section][key]

    def set(self, section, key, value):
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ConfigError(f"unknown config key [{section}] {key}")
        self.sections[section][key] = _SCHEMA[section][key](value)

    def field_list(self):
        names = [s.strip() for s in self.get("outputs", "fields").split(",") if s.strip()]
        bad = [s for s in names if s not in FIELD_ORDER]
        if bad:
            raise ConfigError(f"unknown snapshot fields {bad}")
        return [f for f in FIELD_ORDER if f in names]

    def validate(self):
        g = self.sections
        n = g["grid"]["n"]
        if n < 16 or (n & (n - 1)) != 0:
            raise ConfigError(f"grid n must be a power of two >= 16, got {n}")
        if g["grid"]["length"] <= 0:
            raise ConfigError("box length must be positive")
        if g["physics"]["nu"] <= 0:
            raise ConfigError("viscosity must be positive")
        eps, q = g["physics"]["eps"], g["physics"]["q"]
        if not (0.0 < eps < 1.0):
            raise ConfigError(f"eps={eps} outside (0, 1)")
        if not (1.0 < q < 2.0 / (2.0 - eps)):
            raise ConfigError(f"q={q} outside (1, 2/(2-eps)) for eps={eps}")
        if g["scenario"]["name"] not in ("disc_patch", "smooth"):
            raise ConfigError(f"unknown scenario {g['scenario']['name']!r}")
        if g["stepper"]["dt"] <= 0 or g["stepper"]["t_end"] < 0:
            raise ConfigError("stepper times must be positive")
        if not (0 < g["stepper"]["cfl"] <= 0.5):
            raise ConfigError("cfl must lie in (0, 0.5]")
        if g["outputs"]["record_every"] < 1 or g["outputs"]["snapshot_every"] < 1:
            raise ConfigError("output cadences must be >= 1")
        if g["outputs"]["markers_every"] < 0:
            raise ConfigError("markers_every must be >= 0 (0 = snapshot cadence)")
        self.field_list()
        return self

    def serialize(self):
        lines = []
        for sec in _SCHEMA:
            lines.append(f"[{sec}]")
            for key in _SCHEMA[sec]:
                v = self.sections[sec][key]
                lines.append(f"{key} = {_format_value(v)}")
            lines.append("")
        return "\n".join(lines)

    def hash(self):
        return hashlib.sha256(self.serialize().encode()).hexdigest()[:16]


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config(text):
    cfg = Config()
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(f"line {lineno}: unknown key [{section}] {key}")
        caster = _SCHEMA[section][key]
        try:
            cfg.sections[section][key] = caster(val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    return cfg.validate()


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def save_config(cfg, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(cfg.serialize())
