"""Flat ``key = value`` run configuration with typed defaults."""

from __future__ import annotations

from dataclasses import fields
from pathlib import Path

from .swarm import SwarmConfig


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("on", "true", "yes", "1"):
        return True
    if v in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _int_tuple(s: str) -> tuple[int, ...]:
    return tuple(int(p) for p in s.replace(" ", "").split(",") if p)


def _shrinkage(s: str):
    s = s.strip()
    return s if s in ("none", "auto") else float(s)


# key -> (default, parser); swarm fields are appended below
_GENERAL = {
    "prices": ("", str),
    "synthetic_n": (0, int),
    "synthetic_T": (0, int),
    "synthetic_seed": (0, int),
    "x0": ("", str),
    "k": (0.30, float),
    "l": (0.001, float),
    "u": (0.05, float),
    "TR": (0.20, float),
    "r_f": (0.0, float),
    "shrinkage": ("none", _shrinkage),
    "handler": ("hybrid", str),
    "algorithm": ("allso", str),
    "mutation": (True, _bool),
    "runs": (25, int),
    "seed": (0, int),
    "grid": ("allso-mut-h,allso-h", str),
    "alpha": (0.05, float),
    "window": (60, int),
    "horizon": (61, int),
    "W0": (10_000_000.0, float),
    "periods_per_year": (12, int),
}

_SWARM = {}
for _f in fields(SwarmConfig):
    if _f.name == "seed":
        continue
    _SWARM[_f.name] = (_f.default, _int_tuple if _f.name == "level_pool" else type(_f.default))

SCHEMA = {**_GENERAL, **_SWARM}


def defaults() -> dict:
    return {k: v for k, (v, _) in SCHEMA.items()}


def _apply(cfg: dict, key: str, raw: str, where: str) -> None:
    key = key.strip()
    if key not in SCHEMA:
        raise ConfigError(f"{where}: unknown key {key!r}")
    try:
        cfg[key] = SCHEMA[key][1](raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key}: {exc}") from exc


def parse_config(text: str, source: str = "<config>") -> dict:
    cfg = defaults()
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{no}: expected 'key = value'")
        key, raw = line.split("=", 1)
        _apply(cfg, key, raw, f"{source}:{no}")
    return cfg


def load_config(path=None, overrides=()) -> dict:
    if path is None:
        cfg = defaults()
    else:
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"config file not found: {p}")
        cfg = parse_config(p.read_text(encoding="utf-8"), str(p))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        _apply(cfg, key, raw, "--set")
    return cfg


def swarm_config(cfg: dict, seed: int) -> SwarmConfig:
    try:
        return SwarmConfig(seed=seed, **{k: cfg[k] for k in _SWARM})
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
