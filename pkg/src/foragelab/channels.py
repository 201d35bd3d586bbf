"""Sensor channel layout and input-ablation masks.

The controller sees 15 scalars grouped into six families. Ablation toggles a
whole family at once and substitutes a constant for every scalar in it.

Channel order (0-based)::

    0-3   compass (quaternion x, y, z, w)
    4     holding food
    5     near food
    6-9   nest light (top, left, bottom, right)
    10    pheromone
    11-14 robot proximity (top, left, bottom, right)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigurationError

N_CHANNELS = 15


class ChannelGroup(Enum):
    COMPASS = "compass"
    HOLDING_FOOD = "holding"
    NEAR_FOOD = "nearfood"
    NEST_LIGHT = "nestlight"
    PHEROMONE = "pheromone"
    ROBOT_PROXIMITY = "robotproximity"

    @property
    def span(self) -> slice:
        return _SPANS[self]

    @property
    def width(self) -> int:
        s = _SPANS[self]
        return s.stop - s.start

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def parse(cls, name: str) -> ChannelGroup:
        """Resolve a canonical name, or an unambiguous prefix of one."""
        key = name.strip().lower().replace("_", "").replace("-", "")
        for g in cls:
            if g.value == key:
                return g
        hits = [g for g in cls if g.value.startswith(key)] if key else []
        if len(hits) == 1:
            return hits[0]
        raise ConfigurationError(
            f"unknown channel group {name!r}; valid names: {', '.join(GROUP_NAMES)}"
        )


GROUPS: tuple[ChannelGroup, ...] = tuple(ChannelGroup)
GROUP_NAMES: tuple[str, ...] = tuple(g.value for g in GROUPS)

_SPANS = {
    ChannelGroup.COMPASS: slice(0, 4),
    ChannelGroup.HOLDING_FOOD: slice(4, 5),
    ChannelGroup.NEAR_FOOD: slice(5, 6),
    ChannelGroup.NEST_LIGHT: slice(6, 10),
    ChannelGroup.PHEROMONE: slice(10, 11),
    ChannelGroup.ROBOT_PROXIMITY: slice(11, 15),
}

_LABELS = {
    ChannelGroup.COMPASS: "Compass",
    ChannelGroup.HOLDING_FOOD: "Holding Food",
    ChannelGroup.NEAR_FOOD: "Near Food",
    ChannelGroup.NEST_LIGHT: "Nest Detection",
    ChannelGroup.PHEROMONE: "Pheromone",
    ChannelGroup.ROBOT_PROXIMITY: "Robot Proximity",
}


def parse_group_set(text: str | Iterable[str]) -> frozenset[ChannelGroup]:
    """Parse ``"holding,nest"`` (or an iterable of names) into a group set."""
    names = text.split(",") if isinstance(text, str) else list(text)
    return frozenset(ChannelGroup.parse(n) for n in names if n.strip())


def sort_groups(groups: Iterable[ChannelGroup]) -> list[ChannelGroup]:
    """Canonical channel order, which every report and CSV uses."""
    order = {g: i for i, g in enumerate(GROUPS)}
    return sorted(groups, key=order.__getitem__)


@dataclass(frozen=True)
class AblationMask:
    """Per-group enable flag plus the constant substituted when disabled."""

    disabled: frozenset[ChannelGroup] = frozenset()
    constants: Mapping[ChannelGroup, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "disabled", frozenset(self.disabled))
        consts = dict(self.constants)
        for g, c in consts.items():
            if not isinstance(g, ChannelGroup):
                raise ConfigurationError(f"mask constant keyed by non-group {g!r}")
            if not math.isfinite(c):
                raise ConfigurationError(f"replacement constant for {g.value} must be finite, got {c}")
        # 0.0 is the default, so dropping it makes equal masks compare equal
        consts = {g: float(c) for g, c in consts.items() if c != 0.0}
        object.__setattr__(self, "constants", consts)

    @classmethod
    def all_enabled(cls) -> AblationMask:
        return cls()

    @classmethod
    def only(cls, enabled: Iterable[ChannelGroup],
             constants: Mapping[ChannelGroup, float] | None = None) -> AblationMask:
        """Mask with exactly ``enabled`` switched on and the complement off."""
        keep = frozenset(enabled)
        return cls(frozenset(g for g in GROUPS if g not in keep), constants or {})

    def is_enabled(self, group: ChannelGroup) -> bool:
        return group not in self.disabled

    @property
    def enabled(self) -> frozenset[ChannelGroup]:
        return frozenset(g for g in GROUPS if g not in self.disabled)

    def constant(self, group: ChannelGroup) -> float:
        return float(self.constants.get(group, 0.0))

    def with_disabled(self, *groups: ChannelGroup) -> AblationMask:
        return AblationMask(self.disabled | frozenset(groups), self.constants)

    def with_enabled(self, *groups: ChannelGroup) -> AblationMask:
        return AblationMask(self.disabled - frozenset(groups), self.constants)

    def channel_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Expand to per-channel ``(enabled bool[15], replacement float[15])``."""
        on = np.ones(N_CHANNELS, dtype=np.bool_)
        value = np.zeros(N_CHANNELS, dtype=np.float64)
        for g in GROUPS:
            value[g.span] = self.constant(g)
            if g in self.disabled:
                on[g.span] = False
        return on, value

    def apply(self, channels: np.ndarray) -> np.ndarray:
        out = np.array(channels, dtype=np.float64, copy=True)
        on, value = self.channel_arrays()
        out[~on] = value[~on]
        return out

    def to_string(self) -> str:
        """Inverse of :func:`parse_mask`; ``"all"`` when nothing is disabled."""
        if not self.disabled:
            return "all"
        parts = []
        for g in sort_groups(self.disabled):
            parts.append(f"{g.value}:off:{self.constant(g)!r}")
        return ",".join(parts)


def parse_mask(text: str, defaults: Mapping[ChannelGroup, float] | None = None) -> AblationMask:
    """Parse mask syntax such as ``"pheromone:off:1.0,compass:off"``.

    Each item is ``group[:on|off[:constant]]``; a bare group name means off.
    Groups without an explicit constant take theirs from ``defaults``.
    ``"all"`` or the empty string enables everything.
    """
    consts = dict(defaults or {})
    disabled: set[ChannelGroup] = set()
    text = text.strip()
    if text in ("", "all"):
        return AblationMask(frozenset(), consts)
    for item in text.split(","):
        parts = [p.strip() for p in item.split(":")]
        if not parts[0]:
            continue
        group = ChannelGroup.parse(parts[0])
        state = parts[1].lower() if len(parts) > 1 else "off"
        if state not in ("on", "off"):
            raise ConfigurationError(f"mask item {item!r}: state must be 'on' or 'off'")
        if len(parts) > 2:
            try:
                consts[group] = float(parts[2])
            except ValueError:
                raise ConfigurationError(f"mask item {item!r}: bad constant {parts[2]!r}") from None
        if len(parts) > 3:
            raise ConfigurationError(f"mask item {item!r}: too many fields")
        if state == "off":
            disabled.add(group)
        else:
            disabled.discard(group)
    return AblationMask(frozenset(disabled), consts)


def all_masks(constants: Mapping[ChannelGroup, float] | None = None) -> list[AblationMask]:
    """All 64 enable/disable combinations, in bit order over :data:`GROUPS`."""
    out = []
    for bits in range(1 << len(GROUPS)):
        off = frozenset(g for i, g in enumerate(GROUPS) if bits >> i & 1)
        out.append(AblationMask(off, constants or {}))
    return out
