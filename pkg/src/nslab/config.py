"""Flat ``key = value`` experiment configuration.

One assignment per line, ``#`` starts a comment, blank lines are ignored.
Unknown or repeated keys are errors, reported with the line number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from .discrete import PRESETS

PRESET_ALIASES = {"fd": "finite_difference", "finite_difference": "finite_difference",
                  "galerkin": "galerkin", "continuum": "continuum"}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None, source: str = "<config>"):
        self.line = line
        self.key = key
        self.source = source
        where = source if line is None else f"{source}:{line}"
        if key is not None:
            where += f": key {key!r}"
        super().__init__(f"{where}: {message}")


def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(s: str) -> int:
    return int(s, 10)


def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("on", "true", "yes", "1"):
        return True
    if low in ("off", "false", "no", "0"):
        return False
    raise ValueError("expected on/off")


def _float_list(s: str) -> tuple:
    vals = tuple(_float(p.strip()) for p in s.split(",") if p.strip())
    if not vals:
        raise ValueError("empty list")
    return vals


def _preset(s: str) -> str:
    if s not in PRESET_ALIASES:
        raise ValueError(f"expected one of {sorted(PRESET_ALIASES)}")
    return PRESET_ALIASES[s]


def _str(s: str) -> str:
    return s


def _variants(s: str) -> tuple:
    from .solver import VARIANTS

    vals = tuple(p.strip() for p in s.split(",") if p.strip())
    bad = [v for v in vals if v not in VARIANTS]
    if bad or not vals:
        raise ValueError(f"expected a comma list from {VARIANTS}")
    return vals


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    help: str


KEYS: dict[str, Key] = {
    "preset": Key(_preset, "finite_difference", f"discretization preset, one of {PRESETS} (fd is accepted)"),
    "N": Key(_int, 16, "modes per axis: the cube |k_l| <= N"),
    "eps": Key(_float, 0.2, "lattice spacing"),
    "dt": Key(_float, 1e-3, "time step"),
    "T": Key(_float, 0.25, "time horizon"),
    "z": Key(_float, 0.6, "solution norm is C^{-z}, z in (1/2, 1)"),
    "delta": Key(_float, 0.05, "noise-check norm is C^{-1/2-delta}"),
    "a": Key(_float, 1.0, "forward stencil offset"),
    "b": Key(_float, 0.0, "backward stencil offset"),
    "L0": Key(_float, 2.0, "box half-width of the multipliers"),
    "seed": Key(_int, 0, "base seed; ensembles use seed, seed+1, ..."),
    "L": Key(_float, 50.0, "blow-up threshold"),
    "out_dir": Key(_str, "out", "output directory"),
    # extensions
    "eps_ladder": Key(_float_list, None, "comma list of eps values (default depends on the subcommand)"),
    "seeds": Key(_int, None, "ensemble size (default: 10 for noise-check, 5 for converge)"),
    "t": Key(_float, 5.0, "time argument of the renormalization constants (5 saturates them)"),
    "second_order": Key(_bool, False, "constants: also compute the second-order family (slow below eps=0.2)"),
    "samples": Key(_int, 10_000, "Monte Carlo sample count"),
    "trials": Key(_int, 100, "random fields per ratio probe"),
    "probe_N": Key(_int, 12, "cube size for ratio probes"),
    "noise_scale": Key(_float, 1.0, "multiplies the noise increments"),
    "counterterms": Key(_bool, True, "include the linear counterterm in the approximating equation"),
    "nonlinear": Key(_bool, True, "include the quadratic drift"),
    "norm_oversample": Key(_float, 1.0, "grid oversampling of the block sup norms in the solver"),
    "variants": Key(_variants, ("approx",), "simulate: comma list of approx, approx_off, reference"),
}


def defaults() -> dict:
    return {k: v.default for k, v in KEYS.items()}


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse config text into a dict of the keys present (values converted)."""
    out: dict = {}
    seen: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected key = value", lineno, None, source)
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ConfigError("missing key", lineno, None, source)
        if key not in KEYS:
            raise ConfigError(f"unknown key (known: {', '.join(KEYS)})", lineno, key, source)
        if key in seen:
            raise ConfigError(f"repeated key, first set on line {seen[key]}", lineno, key, source)
        if value == "":
            raise ConfigError("missing value", lineno, key, source)
        try:
            out[key] = KEYS[key].parse(value)
        except ValueError as exc:
            raise ConfigError(f"bad value {value!r}: {exc}", lineno, key, source) from None
        seen[key] = lineno
    return out


def load_config(path: str | Path | None, overrides: dict | None = None) -> dict:
    """Defaults, then the file, then ``overrides`` (``None`` values skipped)."""
    cfg = defaults()
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}", source=str(p)) from None
        cfg.update(parse_config(text, str(p)))
    for k, v in (overrides or {}).items():
        if v is not None:
            cfg[k] = v
    return cfg


def to_jsonable(cfg: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in cfg.items()}


__all__ = ["KEYS", "ConfigError", "Key", "defaults", "parse_config", "load_config", "to_jsonable"]
