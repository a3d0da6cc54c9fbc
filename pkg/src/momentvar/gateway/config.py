"""Flat ``key = value`` configuration files with namespaced keys."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from ..errors import InvalidInputError

SEED_ENV = "MOMENTVAR_SEED"

# key -> (type, default). ``None`` defaults mean "unset".
SCHEMA: Dict[str, tuple] = {
    "seed": (int, 0),
    "output.dir": (str, "reports"),
    "output.max_plot_rows": (int, 10_000),
    "input.ticks": (str, None),
    "input.options": (str, None),
    "heston.mu": (float, 0.0),
    "heston.kappa": (float, 2.0),
    "heston.theta": (float, 0.04),
    "heston.sigma": (float, 0.5),
    "heston.rho": (float, -0.7),
    "heston.v0": (float, None),
    "heston.s0": (float, 1.0),
    "jumps.intensity": (float, 0.0),
    "jumps.mean": (float, 0.0),
    "jumps.sd": (float, 0.0),
    "jumps.method": (str, "monte_carlo"),
    "jumps.scales": (list, None),
    "sim.n_paths": (int, 10_000),
    "sim.n_steps": (int, None),
    "sim.horizon_T": (float, None),
    "sim.horizon_days": (float, 1.0),
    "sim.days_per_year": (float, 252.0),
    "sim.steps_per_day": (int, 390),
    "sim.n_jobs": (int, 1),
    "realized.bar_seconds": (float, 300.0),
    "realized.convention": (str, "calendar365"),
    "realized.include_gaps": (bool, True),
    "realized.lags": (int, 18),
    "filter.min_days": (int, 10),
    "filter.weekday": (str, "wednesday"),
    "filter.otm_only": (bool, True),
    "filter.buckets": (list, [0.85, 1.00, 1.15]),
    "quadrature.extrapolate": (bool, False),
    "hedge.kinds": (list, ["tmv", "fmv"]),
    "hedge.fixed_leg": (float, 0.0),
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(key: str, raw: str):
    typ = SCHEMA[key][0]
    text = raw.strip()
    try:
        if typ is bool:
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if typ is int:
            return int(text)
        if typ is float:
            return float(text)
        if typ is list:
            items = [t.strip() for t in text.split(",") if t.strip()]
            out = []
            for t in items:
                try:
                    out.append(float(t))
                except ValueError:
                    out.append(t)
            return out
        return text
    except ValueError as exc:
        raise InvalidInputError(f"config key {key!r}: {exc}") from exc


@dataclass
class Config:
    values: Dict[str, Any] = field(default_factory=dict)
    source: Optional[str] = None

    def __getitem__(self, key: str):
        if key not in SCHEMA:
            raise KeyError(key)
        return self.values.get(key, SCHEMA[key][1])

    def get(self, key: str, default=None):
        v = self[key]
        return default if v is None else v

    def explicit(self, key: str) -> bool:
        return key in self.values

    def resolved(self) -> Dict[str, Any]:
        """Every schema key with its effective value, sorted by key."""
        return {k: self[k] for k in sorted(SCHEMA)}


def parse_config(text: str, source: Optional[str] = None,
                 env: Optional[Mapping[str, str]] = None) -> Config:
    """Parse config text. Unknown keys and malformed lines are errors.

    ``#`` starts a comment. ``MOMENTVAR_SEED`` in ``env`` overrides ``seed``.
    """
    values: Dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"{source or 'config'}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise InvalidInputError(f"{source or 'config'}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    env = os.environ if env is None else env
    if env.get(SEED_ENV, "").strip():
        values["seed"] = _coerce("seed", env[SEED_ENV])
    return Config(values=values, source=source)


def load_config(path: Union[str, Path], env: Optional[Mapping[str, str]] = None) -> Config:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path), env=env)


def empty_config(env: Optional[Mapping[str, str]] = None) -> Config:
    return parse_config("", env=env)
