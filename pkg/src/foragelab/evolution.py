"""NEAT over controller genomes, scored by full foraging trials.

The run is a pure function of ``(EvolutionConfig, TrialConfig, master_seed)``:
one numpy Generator drives every stochastic operator, and each generation's
trial seeds come from ``SeedSequence([master_seed, generation])``. All genomes
of a generation face the same environments.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .channels import AblationMask
from .errors import ConfigurationError
from .netcontrol import (BIAS_ID, FIRST_HIDDEN_ID, INPUT_IDS, OUTPUT_IDS, ConnectionGene, Genome,
                         NodeGene, NodeKind, Network, interface_nodes)
from .simulation import TrialConfig, initial_world, simulate
from .world import DISTRIBUTIONS, WorldState

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvolutionConfig:
    population_size: int = 100
    generations: int = 100
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 0.4
    compat_threshold: float = 3.0
    weight_mutate_rate: float = 0.8
    weight_perturb_sd: float = 0.5
    add_node_rate: float = 0.03
    add_connection_rate: float = 0.05
    crossover_rate: float = 0.75
    elitism: int = 1
    trial_seeds_per_eval: int = 3
    distribution_mode: str = "uniform"
    survival_threshold: float = 0.2
    stagnation_limit: int = 15
    species_elitism: int = 2
    weight_limit: float = 8.0
    init_weight_sd: float = 1.0

    def __post_init__(self):
        for name in ("weight_mutate_rate", "add_node_rate", "add_connection_rate",
                     "crossover_rate", "survival_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"evolution.{name} must be in [0, 1], got {v}")
        if self.population_size < 2:
            raise ConfigurationError(f"evolution.population_size must be >= 2, got {self.population_size}")
        if self.generations < 0:
            raise ConfigurationError(f"evolution.generations must be >= 0, got {self.generations}")
        if self.compat_threshold <= 0 or self.weight_limit <= 0:
            raise ConfigurationError("evolution thresholds must be > 0")
        if self.weight_perturb_sd < 0 or self.init_weight_sd < 0:
            raise ConfigurationError("evolution weight scales must be >= 0")
        if self.trial_seeds_per_eval < 1:
            raise ConfigurationError("evolution.trial_seeds_per_eval must be >= 1")
        if self.elitism < 0 or self.species_elitism < 0 or self.stagnation_limit < 1:
            raise ConfigurationError("evolution elitism counts must be >= 0 and stagnation_limit >= 1")
        if self.distribution_mode not in DISTRIBUTIONS:
            raise ConfigurationError(
                f"unknown distribution {self.distribution_mode!r}; valid: {', '.join(DISTRIBUTIONS)}"
            )


class InnovationLedger:
    """Run-wide registry of structural innovations.

    A ``(from, to)`` link gets one innovation number for the whole run, whether
    it arose from add-connection or from a node split; splitting ``(from, to)``
    always yields the same hidden node id.
    """

    def __init__(self, next_innovation: int = 0, next_node: int = FIRST_HIDDEN_ID):
        self.links: dict[tuple[int, int], int] = {}
        self.splits: dict[tuple[int, int], int] = {}
        self.next_innovation = next_innovation
        self.next_node = next_node

    def link(self, a: int, b: int) -> int:
        key = (a, b)
        if key not in self.links:
            self.links[key] = self.next_innovation
            self.next_innovation += 1
        return self.links[key]

    def split(self, a: int, b: int) -> int:
        key = (a, b)
        if key not in self.splits:
            self.splits[key] = self.next_node
            self.next_node += 1
        return self.splits[key]


@dataclass
class Species:
    representative: Genome
    members: list[int] = field(default_factory=list)
    staleness: int = 0
    best_fitness: float = -math.inf
    id: int = 0


@dataclass
class GenerationStats:
    generation: int
    best_fitness: float
    mean_fitness: float
    species_count: int
    species_members: list[list[int]]
    trial_seeds: list[int]


@dataclass
class EvolutionResult:
    champion: Genome
    history: list[GenerationStats]
    ledger: InnovationLedger
    population: list[Genome]
    events: list[str] = field(default_factory=list)

    @property
    def initial_best(self) -> float:
        return self.history[0].best_fitness

    def log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["generation", "best_fitness", "mean_fitness", "species_count"])
        for s in self.history:
            w.writerow([s.generation, repr(float(s.best_fitness)), repr(float(s.mean_fitness)),
                        s.species_count])
        return buf.getvalue()


# -- fitness ------------------------------------------------------------------

def score_trial(picked: int, delivered: int) -> int:
    """One point per resource picked up, two per resource dropped at the nest."""
    return picked + 2 * delivered


def fitness(genome: Genome, config: TrialConfig, seeds: Sequence[int],
            worlds: Sequence[WorldState] | None = None) -> float:
    """Mean trial score over ``seeds``; single robot count comes from ``config.arena``."""
    if len(seeds) == 0:
        raise ConfigurationError("fitness needs at least one trial seed")
    net = Network(genome)
    mask = AblationMask.all_enabled()
    total = 0
    for i, seed in enumerate(seeds):
        world = worlds[i] if worlds is not None else None
        out = simulate(net, mask, int(seed), config, world=world)
        total += score_trial(out.picked, out.delivered)
    return total / len(seeds)


def generation_seeds(master_seed: int, generation: int, count: int) -> list[int]:
    ss = np.random.SeedSequence([master_seed, generation])
    return [int(s) for s in ss.generate_state(count, dtype=np.uint32)]


# -- operators ------------------------------------------------------------------

def compatibility(a: Genome, b: Genome, config: EvolutionConfig) -> float:
    """c1*E/N + c2*D/N + c3*mean|dw| with N = larger gene count (1 below 20 genes)."""
    ga = {c.innovation: c for c in a.connections}
    gb = {c.innovation: c for c in b.connections}
    if not ga and not gb:
        return 0.0
    cutoff = min(max(ga, default=-1), max(gb, default=-1))
    excess = disjoint = 0
    for innov in ga.keys() ^ gb.keys():
        if innov > cutoff:
            excess += 1
        else:
            disjoint += 1
    matching = ga.keys() & gb.keys()
    wbar = (sum(abs(ga[i].weight - gb[i].weight) for i in matching) / len(matching)) if matching else 0.0
    n = max(len(ga), len(gb))
    if n < 20:
        n = 1
    return config.c1 * excess / n + config.c2 * disjoint / n + config.c3 * wbar


def _add_connection(genome: Genome, ledger: InnovationLedger, config: EvolutionConfig,
                    rng: np.random.Generator) -> Genome:
    existing = {(c.from_id, c.to_id) for c in genome.connections}
    targets = [n.id for n in genome.nodes if n.kind in (NodeKind.HIDDEN, NodeKind.OUTPUT)]
    candidates = [(n.id, t) for n in genome.nodes for t in targets if (n.id, t) not in existing]
    if not candidates:
        return genome
    a, b = candidates[int(rng.integers(len(candidates)))]
    w = float(np.clip(rng.normal(0.0, config.init_weight_sd), -config.weight_limit, config.weight_limit))
    genome.connections = sorted(genome.connections + [ConnectionGene(a, b, w, True, ledger.link(a, b))],
                                key=lambda c: c.innovation)
    return genome


def _add_node(genome: Genome, ledger: InnovationLedger, rng: np.random.Generator) -> Genome:
    enabled = [i for i, c in enumerate(genome.connections) if c.enabled]
    if not enabled:
        return genome
    k = enabled[int(rng.integers(len(enabled)))]
    old = genome.connections[k]
    h = ledger.split(old.from_id, old.to_id)
    if h in genome.kinds:
        # this link was split before in this lineage; re-splitting would reuse the node id
        return genome
    conns = list(genome.connections)
    conns[k] = old.with_enabled(False)
    conns.append(ConnectionGene(old.from_id, h, 1.0, True, ledger.link(old.from_id, h)))
    conns.append(ConnectionGene(h, old.to_id, old.weight, True, ledger.link(h, old.to_id)))
    genome.nodes = sorted(genome.nodes + [NodeGene(h, NodeKind.HIDDEN)], key=lambda n: n.id)
    genome.connections = sorted(conns, key=lambda c: c.innovation)
    return genome


def mutate(genome: Genome, ledger: InnovationLedger, config: EvolutionConfig,
           rng: np.random.Generator) -> Genome:
    """Weight perturbation, then add-node, then add-connection; returns a new genome."""
    child = genome.copy()
    child.fitness = None
    if child.connections and rng.random() < config.weight_mutate_rate:
        noise = rng.normal(0.0, config.weight_perturb_sd, len(child.connections))
        lim = config.weight_limit
        child.connections = [c.with_weight(min(max(c.weight + d, -lim), lim)) if d != 0.0 else c
                             for c, d in zip(child.connections, noise)]
    if rng.random() < config.add_node_rate:
        child = _add_node(child, ledger, rng)
    if rng.random() < config.add_connection_rate:
        child = _add_connection(child, ledger, config, rng)
    return child


def crossover(fit_parent: Genome, other: Genome, rng: np.random.Generator) -> Genome:
    """Matching genes from either parent at random; disjoint and excess from ``fit_parent``."""
    theirs = {c.innovation: c for c in other.connections}
    genes = []
    for c in fit_parent.connections:
        o = theirs.get(c.innovation)
        genes.append(o if o is not None and rng.random() < 0.5 else c)
    kinds = {**other.kinds, **fit_parent.kinds}
    keep = {n.id for n in fit_parent.nodes if n.kind != NodeKind.HIDDEN}
    for c in genes:
        keep.add(c.from_id)
        keep.add(c.to_id)
    nodes = [NodeGene(i, kinds[i]) for i in keep]
    return Genome(nodes, genes)


def random_genome(ledger: InnovationLedger, config: EvolutionConfig, rng: np.random.Generator,
                  use_bias: bool = True) -> Genome:
    """Fully connected input(+bias) -> output genome with Gaussian weights."""
    sources = list(INPUT_IDS) + ([BIAS_ID] if use_bias else [])
    conns = []
    for a in sources:
        for b in OUTPUT_IDS:
            w = float(np.clip(rng.normal(0.0, config.init_weight_sd), -config.weight_limit, config.weight_limit))
            conns.append(ConnectionGene(a, b, w, True, ledger.link(a, b)))
    return Genome(interface_nodes(use_bias), conns)


# -- speciation and reproduction ---------------------------------------------------

def speciate(population: Sequence[Genome], species: list[Species], config: EvolutionConfig,
             next_id: int) -> tuple[list[Species], int]:
    """Assign every genome to the first species whose representative is close enough."""
    for s in species:
        s.members = []
    for idx, g in enumerate(population):
        for s in species:
            if compatibility(g, s.representative, config) < config.compat_threshold:
                s.members.append(idx)
                break
        else:
            species.append(Species(representative=g, members=[idx], id=next_id))
            next_id += 1
    return [s for s in species if s.members], next_id


def allocate_offspring(scores: Sequence[float], total: int) -> list[int]:
    """Largest-remainder split of ``total`` proportional to ``scores``."""
    s = np.asarray(scores, dtype=np.float64)
    if s.sum() <= 0:
        s = np.ones_like(s)
    quota = s / s.sum() * total
    counts = np.floor(quota).astype(int)
    rest = total - counts.sum()
    order = sorted(range(len(s)), key=lambda i: (-(quota[i] - counts[i]), i))
    for i in order[:rest]:
        counts[i] += 1
    return counts.tolist()


def evolve(config: EvolutionConfig, master_seed: int, trial: TrialConfig | None = None,
           on_generation: Callable[[int, list[Genome], list[Species]], None] | None = None,
           ) -> EvolutionResult:
    """Run NEAT and return the highest-raw-fitness genome seen plus per-generation stats.

    ``trial`` supplies arena and network settings; its distribution is replaced
    by ``config.distribution_mode``. ``on_generation`` is called after each
    generation is evaluated and speciated.
    """
    trial = (trial or TrialConfig()).with_distribution(config.distribution_mode)
    rng = np.random.default_rng([master_seed, 0x4E454154])
    ledger = InnovationLedger()
    use_bias = trial.network.use_bias
    population = [random_genome(ledger, config, rng, use_bias) for _ in range(config.population_size)]
    species: list[Species] = []
    next_species_id = 0
    champion: Genome | None = None
    history: list[GenerationStats] = []
    events: list[str] = []

    for gen in range(config.generations + 1):
        seeds = generation_seeds(master_seed, gen, config.trial_seeds_per_eval)
        worlds = [initial_world(s, trial) for s in seeds]
        for g in population:
            g.fitness = fitness(g, trial, seeds, worlds)
        fits = [g.fitness for g in population]
        best_idx = int(np.argmax(fits))
        if champion is None or fits[best_idx] > champion.fitness:
            champion = population[best_idx].copy()
            champion.meta = {"distribution": config.distribution_mode, "master_seed": int(master_seed),
                             "generation": gen}

        species, next_species_id = speciate(population, species, config, next_species_id)
        history.append(GenerationStats(gen, float(max(fits)), float(np.mean(fits)), len(species),
                                       [list(s.members) for s in species], seeds))
        log.info("generation %d: best %.2f mean %.2f species %d", gen, max(fits), np.mean(fits), len(species))
        if on_generation is not None:
            on_generation(gen, population, species)
        if gen == config.generations:
            break

        for s in species:
            best = max(fits[i] for i in s.members)
            if best > s.best_fitness:
                s.best_fitness = best
                s.staleness = 0
            else:
                s.staleness += 1
        ranked = sorted(species, key=lambda s: -s.best_fitness)
        protected = {id(s) for s in ranked[:config.species_elitism]}
        survivors = [s for s in species if s.staleness < config.stagnation_limit or id(s) in protected]
        if not survivors:
            events.append(f"generation {gen}: all species stagnant, restarting from champion")
            log.warning(events[-1])
            population = [champion.copy()] + [mutate(champion, ledger, config, rng)
                                              for _ in range(config.population_size - 1)]
            species = []
            continue
        species = survivors

        scores = [sum(fits[i] for i in s.members) / len(s.members) for s in species]
        counts = allocate_offspring(scores, config.population_size)
        offspring: list[Genome] = []
        for s, n in zip(species, counts):
            if n == 0:
                continue
            members = sorted(s.members, key=lambda i: (-fits[i], i))
            for i in members[:min(config.elitism, n)]:
                elite = population[i].copy()
                elite.fitness = None
                offspring.append(elite)
            pool = members[:max(1, math.ceil(config.survival_threshold * len(members)))]
            for _ in range(n - min(config.elitism, n)):
                if len(pool) > 1 and rng.random() < config.crossover_rate:
                    a, b = (int(x) for x in rng.choice(pool, size=2, replace=False))
                    if fits[b] > fits[a]:
                        a, b = b, a
                    child = crossover(population[a], population[b], rng)
                else:
                    child = population[pool[int(rng.integers(len(pool)))]]
                offspring.append(mutate(child, ledger, config, rng))
        for s in species:
            s.representative = population[s.members[int(rng.integers(len(s.members)))]]
        population = offspring

    return EvolutionResult(champion, history, ledger, population, events)


def smoke_profile(config: EvolutionConfig | None = None) -> EvolutionConfig:
    """Population 50, 30 generations; everything else unchanged."""
    return replace(config or EvolutionConfig(), population_size=50, generations=30)
