"""Run configuration files.

A run config is a JSON object with up to five sections: ``arena``,
``network``, ``evolution``, ``ablation`` and ``io``. Missing keys take their
defaults, unknown keys are rejected and every error names the offending
location, e.g. ``arena.nest_radiu: unknown key``.

``pheromone_half_life: null`` means marks never fade; ``ablation.seeds`` is
either a list of trial seeds or a count ``n`` meaning seeds ``0..n-1``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

from .channels import GROUP_NAMES, ChannelGroup
from .errors import ConfigurationError, ContractViolation, GenomeFormatError
from .evolution import EvolutionConfig
from .netcontrol import NetworkConfig, parse_json_bytes
from .simulation import TrialConfig
from .world import DISTRIBUTIONS, ArenaConfig

CONFIG_SCHEMA = "forage-lab/run-config"
CONFIG_VERSION = 1


@dataclass(frozen=True)
class AblationSettings:
    seeds: tuple[int, ...] | int = 10
    alpha: float = 0.05
    min_rel_drop: float = 0.2
    replacement: Mapping[str, float] = field(default_factory=dict)
    sample_stride: int = 50
    distribution: str | None = None

    def __post_init__(self):
        if isinstance(self.seeds, int):
            if self.seeds < 1:
                raise ConfigurationError(f"ablation.seeds must be >= 1, got {self.seeds}")
        elif len(self.seeds) == 0:
            raise ConfigurationError("ablation.seeds must not be empty")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError(f"ablation.alpha must be in (0, 1), got {self.alpha}")
        if self.min_rel_drop < 0:
            raise ConfigurationError(f"ablation.min_rel_drop must be >= 0, got {self.min_rel_drop}")
        if self.sample_stride < 1:
            raise ConfigurationError(f"ablation.sample_stride must be >= 1, got {self.sample_stride}")
        for name in self.replacement:
            if name not in GROUP_NAMES:
                raise ConfigurationError(
                    f"ablation.replacement.{name}: unknown group; valid: {', '.join(GROUP_NAMES)}"
                )
        if self.distribution is not None and self.distribution not in DISTRIBUTIONS:
            raise ConfigurationError(
                f"ablation.distribution: {self.distribution!r} is not one of {', '.join(DISTRIBUTIONS)}"
            )

    def seed_list(self) -> list[int]:
        return list(range(self.seeds)) if isinstance(self.seeds, int) else list(self.seeds)

    def constants(self) -> dict[ChannelGroup, float]:
        return {ChannelGroup(k): float(v) for k, v in self.replacement.items()}


@dataclass(frozen=True)
class IOSettings:
    output_dir: str = "results"
    plots: bool = True
    wall_clock_budget_s: float | None = None


@dataclass(frozen=True)
class RunConfig:
    arena: ArenaConfig = field(default_factory=ArenaConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    ablation: AblationSettings = field(default_factory=AblationSettings)
    io: IOSettings = field(default_factory=IOSettings)

    def trial_config(self, distribution: str | None = None) -> TrialConfig:
        dist = distribution or self.ablation.distribution or self.evolution.distribution_mode
        return TrialConfig(self.arena, self.network, dist, self.ablation.sample_stride)

    def to_dict(self) -> dict[str, Any]:
        ab = self.ablation
        return {
            "schema": CONFIG_SCHEMA,
            "schema_version": CONFIG_VERSION,
            "arena": self.arena.to_dict(),
            "network": _plain(self.network),
            "evolution": _plain(self.evolution),
            "ablation": {
                "seeds": ab.seeds if isinstance(ab.seeds, int) else list(ab.seeds),
                "alpha": ab.alpha,
                "min_rel_drop": ab.min_rel_drop,
                "replacement": {k: ab.replacement[k] for k in sorted(ab.replacement)},
                "sample_stride": ab.sample_stride,
                "distribution": ab.distribution,
            },
            "io": _plain(self.io),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def sha256(self) -> str:
        """Hash of the canonical serialization, independent of file formatting."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _plain(obj: Any) -> dict[str, Any]:
    return {f.name: getattr(obj, f.name) for f in fields(obj)}


# -- parsing --------------------------------------------------------------------

def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v: Any) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(v)


def _want(cond: bool, where: str, what: str, value: Any) -> None:
    if not cond:
        raise ConfigurationError(f"{where}: expected {what}, got {json.dumps(value)}")


def _check_value(where: str, default: Any, value: Any) -> Any:
    """Validate ``value`` against the type of the field's default."""
    if isinstance(default, bool):
        _want(isinstance(value, bool), where, "true or false", value)
        return value
    if isinstance(default, int):
        _want(_is_int(value), where, "an integer", value)
        return value
    if isinstance(default, float):
        _want(_is_num(value), where, "a number", value)
        return float(value)
    if isinstance(default, str):
        _want(isinstance(value, str), where, "a string", value)
        return value
    raise AssertionError(where)


def _section(data: Any, where: str, spec: dict[str, Any]) -> dict[str, Any]:
    if not isinstance(data, dict):
        raise ConfigurationError(f"{where}: expected an object, got {json.dumps(data)}")
    for key in data:
        if key not in spec:
            raise ConfigurationError(f"{where}.{key}: unknown key; valid keys: {', '.join(spec)}")
    out = {}
    for key, value in data.items():
        loc = f"{where}.{key}"
        check = spec[key]
        out[key] = check(loc, value) if callable(check) else _check_value(loc, check, value)
    return out


def _nullable_num(loc: str, v: Any) -> float | None:
    if v is None:
        return None
    _want(_is_num(v), loc, "a number or null", v)
    return float(v)


def _half_life(loc: str, v: Any) -> float:
    return math.inf if v is None else _nullable_num(loc, v)


def _nest_center(loc: str, v: Any) -> tuple[float, float] | None:
    if v is None:
        return None
    _want(isinstance(v, list) and len(v) == 2 and all(_is_num(x) for x in v), loc, "[x, y] or null", v)
    return (float(v[0]), float(v[1]))


def _seeds(loc: str, v: Any) -> tuple[int, ...] | int:
    if _is_int(v):
        return v
    _want(isinstance(v, list) and all(_is_int(x) and x >= 0 for x in v), loc,
          "a seed count or a list of non-negative integer seeds", v)
    return tuple(v)


def _replacement(loc: str, v: Any) -> dict[str, float]:
    _want(isinstance(v, dict), loc, "an object mapping group names to numbers", v)
    out = {}
    for k, x in v.items():
        if k not in GROUP_NAMES:
            raise ConfigurationError(f"{loc}.{k}: unknown group; valid: {', '.join(GROUP_NAMES)}")
        _want(_is_num(x), f"{loc}.{k}", "a number", x)
        out[k] = float(x)
    return out


def _nullable_str(loc: str, v: Any) -> str | None:
    if v is not None:
        _want(isinstance(v, str), loc, "a string or null", v)
    return v


def _defaults(cls: type) -> dict[str, Any]:
    inst = cls()
    return {f.name: getattr(inst, f.name) for f in fields(cls)}


def _spec(cls: type, special: dict[str, Any]) -> dict[str, Any]:
    return {**_defaults(cls), **special}


_SECTIONS = {
    "arena": (ArenaConfig, {"nest_center": _nest_center, "pheromone_half_life": _half_life}),
    "network": (NetworkConfig, {}),
    "evolution": (EvolutionConfig, {}),
    "ablation": (AblationSettings, {"seeds": _seeds, "replacement": _replacement,
                                    "distribution": _nullable_str}),
    "io": (IOSettings, {"wall_clock_budget_s": _nullable_num}),
}


def config_from_dict(data: Any) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigurationError("config: expected a JSON object at top level")
    allowed = ("schema", "schema_version", *_SECTIONS)
    for key in data:
        if key not in allowed:
            raise ConfigurationError(f"{key}: unknown top-level key; valid keys: {', '.join(allowed)}")
    if "schema" in data and data["schema"] != CONFIG_SCHEMA:
        raise ConfigurationError(f"schema: expected {CONFIG_SCHEMA!r}, got {data['schema']!r}")
    if "schema_version" in data and data["schema_version"] != CONFIG_VERSION:
        raise ConfigurationError(f"schema_version: unsupported version {data['schema_version']!r}")
    parts = {}
    for name, (cls, special) in _SECTIONS.items():
        values = _section(data.get(name, {}), name, _spec(cls, special))
        try:
            parts[name] = cls(**values)
        except (ConfigurationError, ContractViolation) as e:
            msg = str(e)
            raise ConfigurationError(msg if msg.startswith(name) else f"{name}: {msg}") from None
    return RunConfig(**parts)


def loads_config(raw: str | bytes) -> RunConfig:
    if isinstance(raw, str):
        raw = raw.encode("utf-8")
    try:
        data = parse_json_bytes(raw, "config file")
    except GenomeFormatError as e:
        raise ConfigurationError(str(e)) from None
    return config_from_dict(data)


def load_config(path: str | Path) -> RunConfig:
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise ConfigurationError(f"cannot read config {path}: {e.strerror}") from None
    return loads_config(raw)


def with_smoke_profile(config: RunConfig) -> RunConfig:
    """Population 50, 30 generations."""
    return replace(config, evolution=replace(config.evolution, population_size=50, generations=30))
