"""Run configuration: flat ``key = value`` files, flag overrides, manifest echo."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import ConfigError
from .experiments import DEFAULT_THRESHOLDS, NARROW_SCREEN, THETA_STEP_GRID

EXPERIMENTS = ("odd", "symmetric", "theta-step", "covariance", "evolve", "arrival")
PACKET_KINDS = ("gaussian", "odd_pair", "symmetric_pair", "theta_step")
PROFILES = ("gaussian", "rectangular")


@dataclass
class RunConfig:
    """All knobs of a run.  ``None`` means "use the experiment's default"."""

    experiment: str = "odd"
    out: str = "out"
    seed: int = 0
    # grid
    n: int | None = None
    x_min: float | None = None
    dx: float | None = None
    # packet
    packet: str | None = None
    center: float = -10.0
    width: float = 1.0
    momentum: float = 3.0
    theta1: float = 2.0
    theta2: float = 2.1
    # absorber
    v0: float | None = None
    half_width: float | None = None
    x_center: float = 0.0
    profile: str = "gaussian"
    # time stepping
    dt: float = 1e-3
    t_total: float | None = None
    # theta axis; auto-sized when the bounds are left unset
    theta_min: float | None = None
    theta_max: float | None = None
    theta_samples: int | None = None
    dtheta: float = 0.01
    # experiment-specific
    shift: float = 1.0
    radius: float = 2.0
    x_probe: float = 0.003
    delta: float = 0.5
    ensemble: int = 10000
    thresholds: dict[str, float] = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment: unknown selector {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and not np.isfinite(v):
                raise ConfigError(f"{_key(f.name)}: value must be finite")
        if self.width <= 0:
            raise ConfigError("width: width must be positive")
        if self.dt <= 0:
            raise ConfigError("dt: time step must be positive")
        if self.dtheta <= 0:
            raise ConfigError("dtheta: spacing must be positive")
        if self.n is not None and (self.n < 8 or self.n & (self.n - 1)):
            raise ConfigError("n: grid size must be a power of two >= 8")
        if self.dx is not None and self.dx <= 0:
            raise ConfigError("dx: spacing must be positive")
        if self.v0 is not None and self.v0 < 0:
            raise ConfigError("v0: absorber strength must be non-negative")
        if self.half_width is not None and self.half_width <= 0:
            raise ConfigError("half-width: absorber half width must be positive")
        if self.t_total is not None and self.t_total <= 0:
            raise ConfigError("t-total: total time must be positive")
        if self.theta2 <= self.theta1:
            raise ConfigError("theta2: must exceed theta1")
        if self.packet is not None and self.packet not in PACKET_KINDS:
            raise ConfigError(f"packet: unknown kind {self.packet!r}")
        if self.profile not in PROFILES:
            raise ConfigError(f"profile: unknown absorber profile {self.profile!r}")
        if self.theta_samples is not None and self.theta_samples < 2:
            raise ConfigError("theta-samples: need at least 2 samples")
        if (self.theta_min is None) != (self.theta_max is None):
            raise ConfigError("theta-min: theta-min and theta-max must be given together")
        if self.theta_min is not None and self.theta_max <= self.theta_min:
            raise ConfigError("theta-max: must exceed theta-min")
        if self.ensemble < 1:
            raise ConfigError("ensemble: must be positive")
        for k in self.thresholds:
            if k not in DEFAULT_THRESHOLDS:
                raise ConfigError(f"threshold.{k}: unknown threshold")
        return self

    def resolved(self) -> "RunConfig":
        """Copy with every experiment-dependent default filled in."""
        c = dataclasses.replace(self, thresholds=dict(self.thresholds))
        exp = c.experiment
        if exp == "theta-step":
            g = THETA_STEP_GRID
            c.n = c.n if c.n is not None else g.n
            c.x_min = c.x_min if c.x_min is not None else g.x_min
            c.dx = c.dx if c.dx is not None else g.length / c.n
        else:
            c.n = c.n if c.n is not None else 4096
            c.x_min = c.x_min if c.x_min is not None else -40.0
            c.dx = c.dx if c.dx is not None else -2.0 * c.x_min / c.n
        if c.packet is None:
            c.packet = {
                "odd": "odd_pair",
                "symmetric": "symmetric_pair",
                "theta-step": "theta_step",
                "covariance": "odd_pair",
            }.get(exp, "gaussian")
        if c.v0 is None or c.half_width is None:
            if exp in ("odd", "symmetric"):
                hw, v0 = NARROW_SCREEN.half_width, NARROW_SCREEN.strength
            elif exp == "theta-step":
                hw, v0 = 0.5, 2.0
            else:
                hw, v0 = 2.0, 1.0
            c.half_width = c.half_width if c.half_width is not None else hw
            c.v0 = c.v0 if c.v0 is not None else v0
        if c.t_total is None:
            c.t_total = 2.0 * abs(c.center) / max(abs(c.momentum), 1e-12) + 1.0
        return c.validate()


def _key(name: str) -> str:
    return name.replace("_", "-")


_FIELDS = {_key(f.name): f for f in fields(RunConfig) if f.name != "thresholds"}


def _coerce(key: str, raw: Any) -> Any:
    f = _FIELDS[key]
    if raw is None:
        return None
    if isinstance(raw, str):
        raw = raw.strip()
        if raw.lower() in ("", "none", "auto"):
            if "None" in str(f.type):
                return None
            raise ConfigError(f"{key}: a value is required")
    typ = str(f.type)
    try:
        if typ.startswith("int"):
            val = float(raw)
            if val != int(val):
                raise ValueError
            return int(val)
        if typ.startswith("float"):
            return float(raw)
        return str(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot interpret {raw!r}") from None


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    entries: dict[str, str] = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        entries[k] = v
    return entries


def parse_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Build a validated config from an optional file plus flag overrides.

    Keys use the flag spelling (``half-width``, ``t-total``); thresholds are
    ``threshold.<experiment>.<metric>``.  Unknown keys are rejected.
    """
    entries: dict[str, Any] = {}
    if path is not None:
        entries.update(read_config_file(path))
    if overrides:
        entries.update({_key(k): v for k, v in overrides.items() if v is not None})
    cfg = RunConfig()
    for k, v in entries.items():
        k = _key(k)
        if k.startswith("threshold."):
            name = k[len("threshold."):].replace("-", "_")
            if name not in DEFAULT_THRESHOLDS:
                raise ConfigError(f"{k}: unknown threshold")
            try:
                cfg.thresholds[name] = float(v)
            except ValueError:
                raise ConfigError(f"{k}: cannot interpret {v!r}") from None
            continue
        if k not in _FIELDS:
            raise ConfigError(f"unknown configuration key {k!r}")
        setattr(cfg, _FIELDS[k].name, _coerce(k, v))
    return cfg.validate()


def config_items(cfg: RunConfig) -> list[tuple[str, str]]:
    items = []
    for f in fields(cfg):
        if f.name == "thresholds":
            continue
        v = getattr(cfg, f.name)
        items.append((_key(f.name), "auto" if v is None else repr(v) if isinstance(v, float) else str(v)))
    for k in sorted(cfg.thresholds):
        items.append((f"threshold.{k}", repr(cfg.thresholds[k])))
    return items


def write_manifest(cfg: RunConfig, path: Path, *, version: str, wall_time: float | None = None) -> None:
    lines = [f"# toalab {version}"]
    if wall_time is not None:
        lines.append(f"# wall time {wall_time:.3f} s")
    lines += [f"{k} = {v}" for k, v in config_items(cfg)]
    path.write_text("\n".join(lines) + "\n")
