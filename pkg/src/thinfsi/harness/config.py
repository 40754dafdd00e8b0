"""Flat ``section.key = value`` configuration files and the run configuration."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

from ..forces import FORCE_REGISTRY, VolumeForce, make_force
from ..params import MaterialParams, as_rational, check_convention


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def parse_config_text(text: str, source: str = "<string>") -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_config(path: str | Path) -> dict[str, str]:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror or exc}") from None
    return parse_config_text(text, str(p))


def parse_scalar(value: str) -> Any:
    """``"3"`` -> 3, ``"0.5"`` -> 0.5, ``"7/2"`` -> 3.5, ``"true"`` -> True, else the string."""
    v = value.strip()
    low = v.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        pass
    try:
        return float(Fraction(v))
    except (ValueError, ZeroDivisionError):
        return v


def parse_list(value: str) -> list[Any]:
    return [parse_scalar(s) for s in value.split(",") if s.strip()]


@dataclass(frozen=True)
class RunConfig:
    """Everything an experiment needs; built from a flat key-value mapping."""

    experiment: str = "run"
    gamma: Fraction = Fraction(1)
    kappa: Fraction = Fraction(7, 2)
    h_list: tuple[float, ...] = (0.25, 0.125, 0.0625)
    materials: MaterialParams = field(default_factory=MaterialParams)
    force_id: str = "single-mode"
    force_params: tuple[tuple[str, Any], ...] = (("a1", 1.0), ("profile", (0.0, -2.0)))
    n: int = 16
    m_f: int = 6
    m_s: int = 6
    m: int = 6
    t_final: float = 0.02
    dt: float = 2e-4
    snapshots: int = 10
    convention: str = "consistent"
    scheme: str = "implicit-euler"
    seed: int = 7
    count: int = 100
    eps_list: tuple[float, ...] = (0.25, 0.0625)
    study: str = "oracle"
    workers: int = 1
    out_dir: str | None = None

    def __post_init__(self):
        if not self.h_list:
            raise ConfigError("h list is empty")
        if any(not (0 < h < 1) for h in self.h_list):
            raise ConfigError(f"every h must lie in (0, 1): {self.h_list}")
        if any(b >= a for a, b in zip(self.h_list, self.h_list[1:])):
            raise ConfigError(f"h list must be strictly decreasing: {self.h_list}")
        for name in ("n", "m_f", "m_s", "m"):
            if getattr(self, name) < 4:
                raise ConfigError(f"grid size {name} must be >= 4, got {getattr(self, name)}")
        if self.n % 2:
            raise ConfigError(f"grid.n must be even, got {self.n}")
        if self.force_id not in FORCE_REGISTRY:
            raise ConfigError(f"unknown force id {self.force_id!r}; known: {sorted(FORCE_REGISTRY)}")
        if not (self.dt > 0 and self.t_final > 0):
            raise ConfigError("time.dt and time.t_final must be positive")
        if self.snapshots < 1:
            raise ConfigError("time.snapshots must be >= 1")
        try:
            check_convention(self.convention)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.scheme not in ("exponential", "implicit-euler"):
            raise ConfigError(f"unknown reduced.scheme {self.scheme!r}")
        if self.study not in ("oracle", "residual", "self-test"):
            raise ConfigError(f"unknown study.kind {self.study!r}")
        if self.gamma <= 0 or self.kappa <= 0:
            raise ConfigError("regime exponents must be positive")
        if self.workers < 1:
            raise ConfigError("study.workers must be >= 1")

    # ------------------------------------------------------------------
    @classmethod
    def from_mapping(cls, cfg: Mapping[str, str]) -> "RunConfig":
        known = set(_KEYS) | {k for k in cfg if k.startswith("force.") and k != "force.id"}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kw: dict[str, Any] = {}
        mats: dict[str, float] = {}
        try:
            for key, value in cfg.items():
                if key.startswith("materials."):
                    mats[key.split(".", 1)[1]] = float(parse_scalar(value))
                elif key in _KEYS:
                    name, conv = _KEYS[key]
                    kw[name] = conv(value)
            params = tuple(sorted((k.split(".", 1)[1], _force_value(v)) for k, v in cfg.items()
                                  if k.startswith("force.") and k != "force.id"))
            if params or "force.id" in cfg:
                kw["force_params"] = params
            if mats:
                kw["materials"] = MaterialParams(**mats)
        except (TypeError, ValueError, ZeroDivisionError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid config value: {exc}") from None
        return cls(**kw)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_mapping(read_config(path))

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self

    def force(self) -> VolumeForce:
        try:
            return make_force(self.force_id, **dict(self.force_params))
        except TypeError as exc:
            raise ConfigError(f"bad parameters for force {self.force_id!r}: {exc}") from None

    def as_mapping(self) -> dict[str, str]:
        """Canonical flat key-value form (sorted when written)."""
        m = {
            "experiment.id": self.experiment,
            "regime.gamma": str(self.gamma),
            "regime.kappa": str(self.kappa),
            "regime.h": ", ".join(repr(h) for h in self.h_list),
            "force.id": self.force_id,
            "grid.n": str(self.n), "grid.m_f": str(self.m_f), "grid.m_s": str(self.m_s), "grid.m": str(self.m),
            "time.t_final": repr(self.t_final), "time.dt": repr(self.dt), "time.snapshots": str(self.snapshots),
            "reduced.convention": self.convention, "reduced.scheme": self.scheme,
            "seed": str(self.seed), "inequalities.count": str(self.count),
            "inequalities.eps": ", ".join(repr(e) for e in self.eps_list),
            "study.kind": self.study, "study.workers": str(self.workers),
        }
        for name in ("eta", "rho_f", "mu_hat", "lambda_hat", "rho_s_hat"):
            m[f"materials.{name}"] = repr(getattr(self.materials, name))
        for k, v in self.force_params:
            m[f"force.{k}"] = ", ".join(repr(x) for x in v) if isinstance(v, tuple) else repr(v)
        return m

    def config_hash(self) -> str:
        text = "\n".join(f"{k} = {v}" for k, v in sorted(self.as_mapping().items()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _floats(value: str) -> tuple[float, ...]:
    return tuple(float(x) for x in parse_list(value))


def _force_value(value: str) -> Any:
    if "," in value:
        return tuple(parse_list(value))
    return parse_scalar(value)


_KEYS: dict[str, tuple[str, Any]] = {
    "experiment.id": ("experiment", str),
    "regime.gamma": ("gamma", as_rational),
    "regime.kappa": ("kappa", as_rational),
    "regime.h": ("h_list", _floats),
    "materials.eta": ("", float), "materials.rho_f": ("", float), "materials.mu_hat": ("", float),
    "materials.lambda_hat": ("", float), "materials.rho_s_hat": ("", float),
    "force.id": ("force_id", str),
    "grid.n": ("n", int), "grid.m_f": ("m_f", int), "grid.m_s": ("m_s", int), "grid.m": ("m", int),
    "time.t_final": ("t_final", lambda v: float(parse_scalar(v))),
    "time.dt": ("dt", lambda v: float(parse_scalar(v))),
    "time.snapshots": ("snapshots", int),
    "reduced.convention": ("convention", str),
    "reduced.scheme": ("scheme", str),
    "seed": ("seed", int),
    "inequalities.count": ("count", int),
    "inequalities.eps": ("eps_list", _floats),
    "study.kind": ("study", str),
    "study.workers": ("workers", int),
    "output.dir": ("out_dir", str),
}
