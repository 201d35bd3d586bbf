"""Closed-loop foraging trials: one genome, one mask, one seed."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .channels import AblationMask
from .netcontrol import Genome, Network, NetworkConfig, as_network
from .world import DISTRIBUTIONS, ArenaConfig, WorldState, spawn_world
from .errors import ConfigurationError, InterfaceMismatchError


@dataclass(frozen=True)
class TrialConfig:
    arena: ArenaConfig = field(default_factory=ArenaConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    distribution: str = "uniform"
    sample_stride: int = 50

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise ConfigurationError(
                f"unknown distribution {self.distribution!r}; valid: {', '.join(DISTRIBUTIONS)}"
            )
        if self.sample_stride < 1:
            raise ConfigurationError(f"sample_stride must be >= 1, got {self.sample_stride}")

    def with_distribution(self, distribution: str) -> TrialConfig:
        return replace(self, distribution=distribution)


@dataclass
class TrialOutcome:
    seed: int
    picked: int
    delivered: int
    delivered_by_tick: np.ndarray
    layout_fingerprint: str
    final_world: WorldState


def initial_world(seed: int, config: TrialConfig) -> WorldState:
    """The world a trial starts from; depends on ``(seed, config)`` only."""
    return spawn_world(config.arena, config.distribution, seed)


def simulate(genome: Genome | Network, mask: AblationMask, seed: int, config: TrialConfig,
             world: WorldState | None = None) -> TrialOutcome:
    """Run ``arena.trial_ticks`` control ticks with every robot driven by ``genome``.

    ``world`` may supply a pre-built :func:`initial_world` for the same seed; it
    is copied, never mutated.
    """
    net = as_network(genome)
    if net.n_inputs != 15 or len(net.output_ids) != 3:
        raise InterfaceMismatchError(
            f"controller needs 15 inputs and 3 outputs, got {net.n_inputs} and {len(net.output_ids)}"
        )
    start = initial_world(seed, config) if world is None else world
    w = start.copy()
    arena = config.arena
    params = arena.as_params()
    ticks = arena.trial_ticks
    npher = w.pheromone_xy.shape[0]
    cap = npher + ticks * w.n_robots
    pher_xy = np.zeros((cap, 2))
    pher_xy[:npher] = w.pheromone_xy
    pher_birth = np.zeros(cap, dtype=np.int64)
    pher_birth[:npher] = w.pheromone_birth
    head, nxt = K.build_pheromone_grid(pher_xy, npher, params, cap)
    rstart, ritems = w.resource_grid()
    counts = np.array([w.tick, w.picked, w.delivered, npher], dtype=np.int64)
    on, value = mask.channel_arrays()
    nc = config.network
    delivered = K.run_trial(
        w.pose, w.holding, w.last_mark, w.has_mark, w.resource_xy, w.collected, rstart, ritems,
        pher_xy, pher_birth, head, nxt, counts, params, ticks,
        *net.kernel_args(), nc.passes, nc.sigmoid_slope, nc.lay_threshold, on, value,
    )
    w.tick, w.picked, w.delivered, npher = (int(v) for v in counts)
    w.pheromone_xy = pher_xy[:npher]
    w.pheromone_birth = pher_birth[:npher]
    return TrialOutcome(seed, w.picked, w.delivered, delivered, start.layout_fingerprint(), w)
