"""Flat key-value configuration files.

Grammar, one entry per line::

    # comment (also allowed after a value)
    key = value
    coeff = j k re im        # repeatable: adds c_jk = re + i*im to F

Blank lines are ignored. Keys are case-sensitive; unknown keys are an error
so that typos do not silently fall back to defaults. List-valued keys
(``x0_grid``, ``z0``) take whitespace- or comma-separated numbers.

Recognised keys and their types are listed in :data:`KEYS`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .drift import ModelParams


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


KEYS = {
    # model / cone
    "n": int,
    "sigma": float,
    "alpha": float,
    "c": float,
    "x0": float,
    # Monte Carlo
    "x0_grid": _floats,
    "replicates": int,
    "seed": int,
    "m": int,
    "tol": float,
    "max_iter": int,
    "workers": int,
    "depth": int,
    # integrator
    "eta": float,
    "h_max": float,
    "R_blow": float,
    "r_blow_factor": float,
    "t_end": float,
    # single runs, flow check, long run
    "y0": float,
    "z0": _floats,
    "t_mid": float,
    "t_long": float,
    "burn_in": float,
    "stride": int,
    "n_points": int,
    "n_models": int,
}


@dataclass
class Config:
    values: dict[str, Any] = field(default_factory=dict)
    coeffs: dict[tuple[int, int], complex] = field(default_factory=dict)

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def __contains__(self, key):
        return key in self.values

    def model(self, sigma: float | None = None) -> ModelParams:
        if "n" not in self.values:
            raise ConfigError("config is missing required key 'n'")
        s = self.values.get("sigma", 0.0) if sigma is None else sigma
        return ModelParams(self.values["n"], s, dict(self.coeffs))


def parse_config(text: str) -> Config:
    cfg = Config()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "coeff":
            parts = value.replace(",", " ").split()
            if len(parts) != 4:
                raise ConfigError(f"line {lineno}: coeff needs 'j k re im'")
            try:
                j, k = int(parts[0]), int(parts[1])
                c = complex(float(parts[2]), float(parts[3]))
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: {exc}") from None
            cfg.coeffs[(j, k)] = cfg.coeffs.get((j, k), 0) + c
            continue
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            cfg.values[key] = KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    return cfg


def load_config(path) -> Config:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
