"""2D central-place foraging arena.

A :class:`WorldState` is a value: :func:`step` returns a new state and never
mutates its argument. Internally the state is a handful of numpy arrays so the
same compiled kernels drive both this API and whole trials
(:mod:`foragelab.simulation`).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import _kernels as K
from .errors import ConfigurationError, ContractViolation, PlacementError

DISTRIBUTIONS = ("clustered", "semiclustered", "uniform")
SNAPSHOT_SCHEMA = "forage-lab/world"
SNAPSHOT_VERSION = 1
_PLACEMENT_RETRIES = 1000


@dataclass(frozen=True)
class ArenaConfig:
    """Arena geometry, robot kinematics and resource layout parameters.

    Lengths are in arena units, times in seconds. ``pheromone_half_life`` of
    ``math.inf`` means marks never fade. ``nest_center`` of ``None`` puts the
    nest at the arena center.
    """

    width: float = 10.0
    height: float = 10.0
    nest_center: tuple[float, float] | None = None
    nest_radius: float = 0.3
    collection_radius: float = 0.1
    robot_sensor_range: float = 0.5
    wheel_base: float = 0.1
    speed_scale: float = 0.01
    tick_dt: float = 0.1
    trial_ticks: int = 5000
    pheromone_half_life: float = math.inf
    pheromone_min_spacing: float = 0.05
    resource_count: int = 256
    robot_count: int = 1
    cluster_count: int = 4
    cluster_spread: float = 0.3

    def __post_init__(self):
        if self.nest_center is not None:
            object.__setattr__(self, "nest_center", (float(self.nest_center[0]), float(self.nest_center[1])))
        self.validate()

    @property
    def nest(self) -> tuple[float, float]:
        if self.nest_center is None:
            return (self.width / 2.0, self.height / 2.0)
        return self.nest_center

    def validate(self) -> None:
        for name in ("width", "height", "nest_radius", "collection_radius", "robot_sensor_range",
                     "wheel_base", "speed_scale", "tick_dt", "pheromone_half_life",
                     "pheromone_min_spacing", "cluster_spread"):
            v = getattr(self, name)
            if not (v > 0):
                raise ConfigurationError(f"arena.{name} must be > 0, got {v!r}")
        for name in ("trial_ticks", "resource_count", "robot_count", "cluster_count"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ConfigurationError(f"arena.{name} must be a positive integer, got {v!r}")
        if not self.collection_radius < self.nest_radius < min(self.width, self.height) / 2:
            raise ConfigurationError(
                "arena radii must satisfy collection_radius < nest_radius < min(width, height)/2"
            )
        nx, ny = self.nest
        r = self.nest_radius
        if not (r <= nx <= self.width - r and r <= ny <= self.height - r):
            raise ConfigurationError("arena.nest_center: nest disc must lie fully inside the arena")

    def as_params(self) -> np.ndarray:
        p = np.empty(K.N_PARAMS, dtype=np.float64)
        p[K.P_WIDTH] = self.width
        p[K.P_HEIGHT] = self.height
        p[K.P_NEST_X], p[K.P_NEST_Y] = self.nest
        p[K.P_NEST_R] = self.nest_radius
        p[K.P_COLLECT_R] = self.collection_radius
        p[K.P_SENSOR_RANGE] = self.robot_sensor_range
        p[K.P_WHEEL_BASE] = self.wheel_base
        p[K.P_SPEED_SCALE] = self.speed_scale
        p[K.P_DT] = self.tick_dt
        p[K.P_HALF_LIFE] = self.pheromone_half_life
        p[K.P_MIN_SPACING] = self.pheromone_min_spacing
        p[K.P_DIAG] = math.hypot(self.width, self.height)
        return p

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["nest_center"] = None if self.nest_center is None else list(self.nest_center)
        if math.isinf(self.pheromone_half_life):
            d["pheromone_half_life"] = None
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ArenaConfig:
        data = dict(data)
        if data.get("pheromone_half_life", 0) is None:
            data["pheromone_half_life"] = math.inf
        if data.get("nest_center") is not None:
            data["nest_center"] = tuple(data["nest_center"])
        return cls(**data)


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float


@dataclass(frozen=True)
class RobotState:
    pose: Pose
    holding: bool = False
    last_pheromone_pos: tuple[float, float] | None = None


@dataclass(frozen=True)
class Resource:
    position: tuple[float, float]
    collected: bool = False
    cluster_id: int = -1


@dataclass(frozen=True)
class PheromoneMark:
    position: tuple[float, float]
    birth_tick: int


@dataclass(frozen=True)
class ActuatorCommand:
    """Wheel speeds in [-16, 16] wheel-speed units plus the lay-pheromone flag."""

    left_speed: float
    right_speed: float
    lay_pheromone: bool = False

    def __post_init__(self):
        for v in (self.left_speed, self.right_speed):
            if not -K.MAX_WHEEL <= v <= K.MAX_WHEEL:
                raise ContractViolation(f"wheel speed {v} outside [-16, 16]")


@dataclass(frozen=True)
class SensorFrame:
    """The 15 sensor scalars a robot reads on one tick."""

    compass: tuple[float, float, float, float]
    holding_food: float
    near_food: float
    nest_light: tuple[float, float, float, float]
    pheromone: float
    robot_proximity: tuple[float, float, float, float]

    def to_array(self) -> np.ndarray:
        return np.array([*self.compass, self.holding_food, self.near_food, *self.nest_light,
                         self.pheromone, *self.robot_proximity], dtype=np.float64)

    @classmethod
    def from_array(cls, a: Sequence[float]) -> SensorFrame:
        a = [float(v) for v in a]
        if len(a) != 15:
            raise ContractViolation(f"sensor frame needs 15 scalars, got {len(a)}")
        return cls(tuple(a[0:4]), a[4], a[5], tuple(a[6:10]), a[10], tuple(a[11:15]))


@dataclass(eq=False)
class WorldState:
    config: ArenaConfig
    tick: int
    pose: np.ndarray          # (R, 3) x, y, theta
    holding: np.ndarray       # (R,) bool
    last_mark: np.ndarray     # (R, 2), meaningful where has_mark
    has_mark: np.ndarray      # (R,) bool
    resource_xy: np.ndarray   # (M, 2)
    collected: np.ndarray     # (M,) bool
    cluster_id: np.ndarray    # (M,) int64
    pheromone_xy: np.ndarray  # (P, 2)
    pheromone_birth: np.ndarray  # (P,) int64
    delivered: int = 0
    picked: int = 0
    _grid: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    @property
    def robots(self) -> list[RobotState]:
        out = []
        for i in range(self.pose.shape[0]):
            mark = tuple(map(float, self.last_mark[i])) if self.has_mark[i] else None
            out.append(RobotState(Pose(*map(float, self.pose[i])), bool(self.holding[i]), mark))
        return out

    @property
    def resources(self) -> list[Resource]:
        return [Resource((float(x), float(y)), bool(c), int(k))
                for (x, y), c, k in zip(self.resource_xy, self.collected, self.cluster_id)]

    @property
    def pheromones(self) -> list[PheromoneMark]:
        return [PheromoneMark((float(x), float(y)), int(b))
                for (x, y), b in zip(self.pheromone_xy, self.pheromone_birth)]

    @property
    def n_robots(self) -> int:
        return self.pose.shape[0]

    def resource_grid(self) -> tuple[np.ndarray, np.ndarray]:
        # resource positions never change, so the index is shared by successors
        if self._grid is None:
            self._grid = K.build_resource_grid(self.resource_xy, self.config.as_params())
        return self._grid

    def snapshot(self) -> dict[str, Any]:
        robots = []
        for i in range(self.n_robots):
            x, y, th = (float(v) for v in self.pose[i])
            robots.append({
                "x": x, "y": y, "theta": th, "holding": bool(self.holding[i]),
                "last_pheromone": [float(v) for v in self.last_mark[i]] if self.has_mark[i] else None,
            })
        return {
            "schema": SNAPSHOT_SCHEMA,
            "schema_version": SNAPSHOT_VERSION,
            "config": self.config.to_dict(),
            "tick": int(self.tick),
            "picked": int(self.picked),
            "delivered": int(self.delivered),
            "robots": robots,
            "resources": [
                {"x": float(x), "y": float(y), "cluster_id": int(k), "collected": bool(c)}
                for (x, y), c, k in zip(self.resource_xy, self.collected, self.cluster_id)
            ],
            "pheromones": [
                {"x": float(x), "y": float(y), "birth_tick": int(b)}
                for (x, y), b in zip(self.pheromone_xy, self.pheromone_birth)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.snapshot(), indent=1) + "\n"

    @classmethod
    def from_snapshot(cls, data: dict[str, Any]) -> WorldState:
        if data.get("schema") != SNAPSHOT_SCHEMA or data.get("schema_version") != SNAPSHOT_VERSION:
            raise ConfigurationError("not a world snapshot (schema/version mismatch)")
        config = ArenaConfig.from_dict(data["config"])
        robots = data["robots"]
        res = data["resources"]
        pher = data["pheromones"]
        return cls(
            config=config,
            tick=int(data["tick"]),
            pose=np.array([[r["x"], r["y"], r["theta"]] for r in robots], dtype=np.float64).reshape(-1, 3),
            holding=np.array([r["holding"] for r in robots], dtype=np.bool_),
            last_mark=np.array([r["last_pheromone"] or [0.0, 0.0] for r in robots],
                               dtype=np.float64).reshape(-1, 2),
            has_mark=np.array([r["last_pheromone"] is not None for r in robots], dtype=np.bool_),
            resource_xy=np.array([[r["x"], r["y"]] for r in res], dtype=np.float64).reshape(-1, 2),
            collected=np.array([r["collected"] for r in res], dtype=np.bool_),
            cluster_id=np.array([r["cluster_id"] for r in res], dtype=np.int64),
            pheromone_xy=np.array([[p["x"], p["y"]] for p in pher], dtype=np.float64).reshape(-1, 2),
            pheromone_birth=np.array([p["birth_tick"] for p in pher], dtype=np.int64),
            delivered=int(data["delivered"]),
            picked=int(data["picked"]),
        )

    @classmethod
    def from_json(cls, text: str) -> WorldState:
        return cls.from_snapshot(json.loads(text))

    def fingerprint(self) -> str:
        """SHA-256 over the serialized snapshot; equal states hash equal."""
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def layout_fingerprint(self) -> str:
        """Hash of resource positions and robot poses only."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.resource_xy).tobytes())
        h.update(np.ascontiguousarray(self.pose).tobytes())
        return h.hexdigest()

    def copy(self) -> WorldState:
        return WorldState(
            self.config, self.tick, self.pose.copy(), self.holding.copy(), self.last_mark.copy(),
            self.has_mark.copy(), self.resource_xy, self.collected.copy(), self.cluster_id,
            self.pheromone_xy.copy(), self.pheromone_birth.copy(), self.delivered, self.picked,
            self._grid,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WorldState):
            return NotImplemented
        return self.snapshot() == other.snapshot()


def halving_partition(total: int) -> list[int]:
    """Cluster sizes total/2, total/4, ... down to 1, then singletons for the rest."""
    sizes = []
    remaining = total
    size = total // 2
    while size >= 1 and remaining > 0:
        take = min(size, remaining)
        sizes.append(take)
        remaining -= take
        size //= 2
    sizes.extend([1] * remaining)
    return sizes


def _place_clusters(sizes: Sequence[int], radii: Sequence[float], config: ArenaConfig,
                    rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    nx, ny = config.nest
    xy = np.empty((sum(sizes), 2))
    ids = np.empty(sum(sizes), dtype=np.int64)
    pos = 0
    for cid, (n, r) in enumerate(zip(sizes, radii)):
        lo_x, hi_x = r, config.width - r
        lo_y, hi_y = r, config.height - r
        for _ in range(_PLACEMENT_RETRIES):
            cx = rng.uniform(lo_x, hi_x)
            cy = rng.uniform(lo_y, hi_y)
            if math.hypot(cx - nx, cy - ny) > config.nest_radius + r:
                break
        else:
            raise PlacementError(f"could not place cluster {cid} of radius {r} outside the nest")
        rad = r * np.sqrt(rng.uniform(0.0, 1.0, n))
        ang = rng.uniform(0.0, 2.0 * math.pi, n)
        xy[pos:pos + n, 0] = cx + rad * np.cos(ang)
        xy[pos:pos + n, 1] = cy + rad * np.sin(ang)
        ids[pos:pos + n] = cid
        pos += n
    return xy, ids


def resource_layout(mode: str, total: int, config: ArenaConfig,
                    rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Array form of :func:`generate_resources`: ``(xy (M,2), cluster_id (M,))``."""
    if total < 1:
        raise ConfigurationError(f"resource total must be >= 1, got {total}")
    # members stay within spread/2 of their center so pairwise spread <= cluster_spread
    half = config.cluster_spread / 2.0
    if mode == "clustered":
        k = config.cluster_count
        if total % k:
            raise ConfigurationError(f"clustered mode needs total divisible by {k} clusters, got {total}")
        return _place_clusters([total // k] * k, [half] * k, config, rng)
    if mode == "semiclustered":
        sizes = halving_partition(total)
        unit = max(1, -(-total // config.cluster_count))
        radii = [half * math.sqrt(n / unit) for n in sizes]
        return _place_clusters(sizes, radii, config, rng)
    if mode == "uniform":
        nx, ny = config.nest
        xy = np.empty((total, 2))
        for i in range(total):
            for _ in range(_PLACEMENT_RETRIES):
                x = rng.uniform(0.0, config.width)
                y = rng.uniform(0.0, config.height)
                if math.hypot(x - nx, y - ny) > config.nest_radius:
                    break
            else:
                raise PlacementError("could not place a uniform resource outside the nest")
            xy[i] = x, y
        return xy, np.full(total, -1, dtype=np.int64)
    raise ConfigurationError(f"unknown distribution {mode!r}; valid: {', '.join(DISTRIBUTIONS)}")


def generate_resources(mode: str, total: int, config: ArenaConfig,
                       rng: np.random.Generator) -> list[Resource]:
    xy, ids = resource_layout(mode, total, config, rng)
    return [Resource((float(x), float(y)), False, int(k)) for (x, y), k in zip(xy, ids)]


def new_world(config: ArenaConfig, resources: Sequence[Resource] | tuple[np.ndarray, np.ndarray],
              poses: Sequence[Pose]) -> WorldState:
    if isinstance(resources, tuple):
        xy, ids = resources
        xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
        ids = np.asarray(ids, dtype=np.int64)
        collected = np.zeros(len(ids), dtype=np.bool_)
    else:
        xy = np.array([r.position for r in resources], dtype=np.float64).reshape(-1, 2)
        ids = np.array([r.cluster_id for r in resources], dtype=np.int64)
        collected = np.array([r.collected for r in resources], dtype=np.bool_)
    n = len(poses)
    pose = np.array([[p.x, p.y, K.wrap_angle(float(p.theta))]
                     for p in poses], dtype=np.float64).reshape(-1, 3)
    return WorldState(
        config=config, tick=0, pose=pose,
        holding=np.zeros(n, dtype=np.bool_),
        last_mark=np.zeros((n, 2)), has_mark=np.zeros(n, dtype=np.bool_),
        resource_xy=xy, collected=collected, cluster_id=ids,
        pheromone_xy=np.zeros((0, 2)), pheromone_birth=np.zeros(0, dtype=np.int64),
    )


def spawn_world(config: ArenaConfig, mode: str, seed: int) -> WorldState:
    """Seeded initial world: resource layout first, then robot headings.

    Robots start at the nest center. Nothing but ``(config, mode, seed)``
    influences the result.
    """
    rng = np.random.default_rng(seed)
    layout = resource_layout(mode, config.resource_count, config, rng)
    nx, ny = config.nest
    headings = rng.uniform(-math.pi, math.pi, config.robot_count)
    poses = [Pose(nx, ny, float(h)) for h in headings]
    return new_world(config, layout, poses)


def _commands_array(commands: Any, n: int) -> np.ndarray:
    if isinstance(commands, np.ndarray):
        cmd = np.asarray(commands, dtype=np.float64)
        if cmd.shape != (n, 3):
            raise ContractViolation(f"expected command array of shape ({n}, 3), got {cmd.shape}")
        return cmd
    commands = list(commands)
    if len(commands) != n:
        raise ContractViolation(f"{len(commands)} commands for {n} robots")
    cmd = np.empty((n, 3))
    for i, c in enumerate(commands):
        cmd[i] = c.left_speed, c.right_speed, 1.0 if c.lay_pheromone else 0.0
    return cmd


def step(world: WorldState, commands: Sequence[ActuatorCommand] | np.ndarray) -> WorldState:
    """Advance one tick: move, pick up, deliver, lay pheromone."""
    return step_with_events(world, commands)[0]


def step_with_events(world: WorldState, commands) -> tuple[WorldState, np.ndarray]:
    """Like :func:`step`, also returning which robots laid a mark this tick."""
    n = world.n_robots
    cmd = _commands_array(commands, n)
    out = world.copy()
    params = world.config.as_params()
    npher = out.pheromone_xy.shape[0]
    cap = npher + n
    pher_xy = np.zeros((cap, 2))
    pher_xy[:npher] = out.pheromone_xy
    pher_birth = np.zeros(cap, dtype=np.int64)
    pher_birth[:npher] = out.pheromone_birth
    head, nxt = K.build_pheromone_grid(pher_xy, npher, params, cap)
    counts = np.array([out.tick, out.picked, out.delivered, npher], dtype=np.int64)
    rstart, ritems = world.resource_grid()
    laid = np.zeros(n, dtype=np.bool_)
    K.advance(cmd, out.pose, out.holding, out.last_mark, out.has_mark, out.resource_xy,
              out.collected, rstart, ritems, pher_xy, pher_birth, head, nxt, counts, params, laid)
    out.tick, out.picked, out.delivered, npher = (int(v) for v in counts)
    out.pheromone_xy = pher_xy[:npher]
    out.pheromone_birth = pher_birth[:npher]
    return out, laid


def sense_array(world: WorldState, robot_index: int) -> np.ndarray:
    if not 0 <= robot_index < world.n_robots:
        raise ContractViolation(f"robot index {robot_index} out of range for {world.n_robots} robots")
    params = world.config.as_params()
    npher = world.pheromone_xy.shape[0]
    head, nxt = K.build_pheromone_grid(world.pheromone_xy, npher, params, max(npher, 1))
    rstart, ritems = world.resource_grid()
    out = np.empty(15)
    K.sense_robot(robot_index, world.pose, world.holding, world.resource_xy, world.collected,
                  rstart, ritems, world.pheromone_xy, world.pheromone_birth, head, nxt,
                  world.tick, params, out)
    return out


def sense(world: WorldState, robot_index: int) -> SensorFrame:
    return SensorFrame.from_array(sense_array(world, robot_index))


def write_resources_csv(world_or_layout: WorldState | Sequence[Resource], path: str | Path | None = None) -> str:
    """Export a resource layout as CSV with header ``x,y,cluster_id``."""
    resources = world_or_layout.resources if isinstance(world_or_layout, WorldState) else world_or_layout
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "cluster_id"])
    for r in resources:
        w.writerow([repr(r.position[0]), repr(r.position[1]), r.cluster_id])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text

