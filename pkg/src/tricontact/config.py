"""Flat ``key = value`` run configuration.

Blank lines and ``#`` comments are ignored; every key is typed and unknown
keys are errors, so a typo cannot silently fall back to a default.
"""
from __future__ import annotations

from dataclasses import replace
from pathlib import Path
from typing import Callable, Union

from .experiments import InitialSpec, SweepSpec
from .lattice import Variant


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _names(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


KEYS: dict[str, Callable[[str], object]] = {
    "q_grid": _floats,
    "window_radius": int,
    "horizon": float,
    "replicas": int,
    "master_seed": int,
    "boundary": str.strip,
    "variant": lambda s: Variant(s.strip()),
    "observables": _names,
    "initial": str.strip,
    "block_radius": int,
    "environment": str.strip,
    "spacing": int,
    "healthy_density": float,
    "xi_kappa": int,
    "xi_radius": int,
    "fa1f_sites": int,
}

_INITIAL_KEYS = {"initial": "kind", "block_radius": "block_radius", "environment": "environment",
                 "spacing": "spacing", "healthy_density": "healthy_density"}


def parse_config(text: str) -> dict[str, object]:
    out: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            out[key] = KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return out


def load_config(path: Union[str, Path]) -> dict[str, object]:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def sweep_spec(values: dict[str, object], base: SweepSpec | None = None) -> SweepSpec:
    """Build a :class:`SweepSpec` from parsed values on top of ``base``."""
    base = base or SweepSpec(q_grid=(0.05, 0.9))
    init = {_INITIAL_KEYS[k]: v for k, v in values.items() if k in _INITIAL_KEYS}
    top = {k: v for k, v in values.items() if k not in _INITIAL_KEYS}
    try:
        spec = replace(base, initial=replace(base.initial, **init), **top)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return spec


def format_config(spec: SweepSpec) -> str:
    """Inverse of :func:`sweep_spec`, for echoing the effective settings."""
    i = spec.initial
    rows = [
        ("q_grid", ",".join(repr(q) for q in spec.q_grid)),
        ("window_radius", spec.window_radius), ("horizon", repr(spec.horizon)),
        ("replicas", spec.replicas), ("master_seed", spec.master_seed),
        ("boundary", spec.boundary), ("variant", spec.variant.value),
        ("observables", ",".join(spec.observables)),
        ("initial", i.kind), ("block_radius", i.block_radius), ("environment", i.environment),
        ("spacing", i.spacing), ("healthy_density", repr(i.healthy_density)),
        ("xi_kappa", spec.xi_kappa), ("xi_radius", spec.xi_radius), ("fa1f_sites", spec.fa1f_sites),
    ]
    return "".join(f"{k} = {v}\n" for k, v in rows)


__all__ = ["ConfigError", "KEYS", "parse_config", "load_config", "sweep_spec", "format_config"]
