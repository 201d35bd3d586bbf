import math
from dataclasses import replace

import numpy as np
import pytest

from foragelab.errors import ConfigurationError
from foragelab.evolution import (EvolutionConfig, InnovationLedger, allocate_offspring, compatibility, crossover,
                                 evolve, fitness, generation_seeds, mutate, random_genome, score_trial,
                                 smoke_profile, speciate)
from foragelab.netcontrol import ConnectionGene, Genome, NodeGene, NodeKind, dumps_genome, interface_nodes
from foragelab.simulation import TrialConfig
from foragelab.world import ArenaConfig, Pose, Resource, new_world

QUIET = EvolutionConfig(weight_mutate_rate=0.0, add_node_rate=0.0, add_connection_rate=0.0)


def genome_with(innovations: dict[int, float]) -> Genome:
    """Connections keyed by innovation (< 48); each innovation gets its own source/output pair."""
    conns = [ConnectionGene(k // 3, 16 + k % 3, w, True, k) for k, w in innovations.items()]
    return Genome(interface_nodes(), conns)


def scripted_world(p: int, d: int, config: ArenaConfig):
    """Robot 0 sits in the nest on d stacked resources; p - d helpers each sit on one elsewhere."""
    nx, ny = config.nest
    resources = [Resource((nx, ny), False) for _ in range(d)]
    poses = [Pose(nx, ny, 0.0)]
    for k in range(p - d):
        a = 2 * math.pi * k / max(p - d, 1)
        pos = (nx + 3 * math.cos(a), ny + 3 * math.sin(a))
        resources.append(Resource(pos, False))
        poses.append(Pose(*pos, 0.0))
    return new_world(config, resources, poses)


def still_genome() -> Genome:
    return Genome(interface_nodes(), [])


class TestFitness:
    def test_formula(self):
        assert score_trial(3, 2) == 7

    @pytest.mark.parametrize("p, d", [(0, 0), (1, 0), (1, 1), (5, 2), (12, 12)])
    def test_scripted_episode(self, p, d):
        arena = ArenaConfig(trial_ticks=max(2 * d, 1) + 4)
        cfg = TrialConfig(arena=arena)
        world = scripted_world(p, d, arena)
        assert fitness(still_genome(), cfg, [0], worlds=[world]) == p + 2 * d

    def test_motionless_genome_scores_zero(self):
        cfg = TrialConfig(arena=ArenaConfig(trial_ticks=200))
        assert fitness(still_genome(), cfg, [1, 2, 3]) == 0.0

    def test_seeds_shared_and_stable(self):
        assert generation_seeds(7, 3, 3) == generation_seeds(7, 3, 3)
        assert generation_seeds(7, 3, 3) != generation_seeds(7, 4, 3)


class TestCompatibility:
    def test_identity(self):
        g = genome_with({0: 1.0, 1: -0.5})
        assert compatibility(g, g, EvolutionConfig()) == 0.0

    def test_formula(self):
        a = genome_with({0: 1.0, 1: 0.0, 3: 0.2, 4: 0.3})
        b = genome_with({0: 1.5, 1: 0.5, 2: 0.1})
        assert compatibility(a, b, EvolutionConfig()) == pytest.approx(3.2)

    def test_large_genomes_normalised(self):
        a = genome_with({i: 0.0 for i in range(30)})
        b = genome_with({i: 0.0 for i in range(25)})
        # five excess genes over N = 30
        assert compatibility(a, b, EvolutionConfig()) == pytest.approx(5 / 30)

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        cfg = EvolutionConfig()
        for _ in range(200):
            a = genome_with({int(k): float(rng.normal()) for k in rng.choice(40, rng.integers(0, 25), False)})
            b = genome_with({int(k): float(rng.normal()) for k in rng.choice(40, rng.integers(0, 25), False)})
            assert compatibility(a, b, cfg) == pytest.approx(compatibility(b, a, cfg), abs=1e-12)
            assert compatibility(a, b, cfg) >= 0


class TestMutation:
    def test_add_node_split(self):
        ledger = InnovationLedger(next_innovation=1)
        g = Genome(interface_nodes(), [ConnectionGene(0, 16, 0.7, True, ledger.link(0, 16))])
        cfg = replace(QUIET, add_node_rate=1.0)
        child = mutate(g, ledger, cfg, np.random.default_rng(0))
        h = [n.id for n in child.nodes if n.kind == NodeKind.HIDDEN]
        assert len(h) == 1
        links = {(c.from_id, c.to_id): c for c in child.connections}
        assert not links[(0, 16)].enabled
        assert links[(0, h[0])].weight == 1.0 and links[(0, h[0])].enabled
        assert links[(h[0], 16)].weight == 0.7 and links[(h[0], 16)].enabled
        # parent untouched
        assert len(g.connections) == 1 and g.connections[0].enabled

    def test_same_link_same_innovation(self):
        ledger = InnovationLedger()
        assert ledger.link(3, 17) == ledger.link(3, 17)
        assert ledger.link(3, 18) != ledger.link(3, 17)
        assert ledger.split(3, 17) == ledger.split(3, 17)

    def test_identical_add_connection_mutations(self):
        ledger = InnovationLedger()
        g = Genome(interface_nodes(), [])
        cfg = replace(QUIET, add_connection_rate=1.0)
        a = mutate(g, ledger, cfg, np.random.default_rng(5))
        b = mutate(g, ledger, cfg, np.random.default_rng(5))
        assert [(c.from_id, c.to_id, c.innovation) for c in a.connections] == \
               [(c.from_id, c.to_id, c.innovation) for c in b.connections]

    def test_zero_sd_keeps_weights(self):
        ledger = InnovationLedger()
        g = random_genome(ledger, EvolutionConfig(), np.random.default_rng(1))
        cfg = replace(QUIET, weight_mutate_rate=1.0, weight_perturb_sd=0.0)
        child = mutate(g, ledger, cfg, np.random.default_rng(2))
        assert [c.weight for c in child.connections] == [c.weight for c in g.connections]

    def test_add_connection_when_full_is_noop(self):
        nodes = [NodeGene(0, NodeKind.INPUT), NodeGene(1, NodeKind.OUTPUT)]
        g = Genome(nodes, [ConnectionGene(0, 1, 0.1, True, 0), ConnectionGene(1, 1, 0.2, True, 1)])
        child = mutate(g, InnovationLedger(2), replace(QUIET, add_connection_rate=1.0), np.random.default_rng(0))
        assert child.connections == g.connections

    def test_invariants_hold_under_heavy_mutation(self):
        ledger = InnovationLedger()
        cfg = EvolutionConfig(add_node_rate=0.5, add_connection_rate=0.5)
        rng = np.random.default_rng(3)
        g = random_genome(ledger, cfg, rng)
        for _ in range(200):
            g = mutate(g, ledger, cfg, rng)
            g.validate()
            assert all(abs(c.weight) <= cfg.weight_limit for c in g.connections)


class TestCrossover:
    def test_identical_parents(self):
        g = random_genome(InnovationLedger(), EvolutionConfig(), np.random.default_rng(0))
        child = crossover(g, g, np.random.default_rng(1))
        assert child.nodes == g.nodes and child.connections == g.connections

    def test_disjoint_from_fitter(self):
        a = genome_with({1: 0.1, 2: 0.2})
        b = genome_with({1: 0.3, 3: 0.4})
        for s in range(20):
            child = crossover(a, b, np.random.default_rng(s))
            assert {c.innovation for c in child.connections} <= {1, 2}

    def test_provenance_and_node_set(self):
        cfg = EvolutionConfig(add_node_rate=0.3, add_connection_rate=0.3)
        ledger = InnovationLedger()
        rng = np.random.default_rng(9)
        pool = [random_genome(ledger, cfg, rng) for _ in range(10)]
        for _ in range(300):
            pool.append(mutate(pool[int(rng.integers(len(pool)))], ledger, cfg, rng))
        for _ in range(500):
            i, j = rng.choice(len(pool), 2, replace=False)
            a, b = pool[i], pool[j]
            child = crossover(a, b, rng)
            genes_a = {(c.innovation, c.from_id, c.to_id, c.weight, c.enabled) for c in a.connections}
            genes_b = {(c.innovation, c.from_id, c.to_id, c.weight, c.enabled) for c in b.connections}
            for c in child.connections:
                assert (c.innovation, c.from_id, c.to_id, c.weight, c.enabled) in genes_a | genes_b
            referenced = {c.from_id for c in child.connections} | {c.to_id for c in child.connections}
            fixed = {n.id for n in a.nodes if n.kind != NodeKind.HIDDEN}
            assert {n.id for n in child.nodes} == referenced | fixed
            child.validate()


class TestSpeciation:
    def test_partition(self):
        cfg = EvolutionConfig(compat_threshold=0.4)
        ledger = InnovationLedger()
        rng = np.random.default_rng(0)
        pop = [random_genome(ledger, cfg, rng) for _ in range(30)]
        species, _ = speciate(pop, [], cfg, 0)
        members = [i for s in species for i in s.members]
        assert sorted(members) == list(range(30))
        assert len(species) > 1

    @pytest.mark.parametrize("scores, total", [([1, 1, 1], 10), ([0, 0], 5), ([3.0, 1.0], 7), ([5, 0, 0], 3)])
    def test_allocation(self, scores, total):
        counts = allocate_offspring(scores, total)
        assert sum(counts) == total and all(c >= 0 for c in counts)

    def test_allocation_proportional(self):
        assert allocate_offspring([3.0, 1.0], 8) == [6, 2]


def tiny_trial() -> TrialConfig:
    return TrialConfig(arena=ArenaConfig(trial_ticks=150))


class TestEvolve:
    CFG = EvolutionConfig(population_size=12, generations=3)

    def test_deterministic(self):
        a = evolve(self.CFG, 7, tiny_trial())
        b = evolve(self.CFG, 7, tiny_trial())
        assert dumps_genome(a.champion) == dumps_genome(b.champion)
        assert a.log_csv() == b.log_csv()

    def test_zero_generations(self):
        res = evolve(replace(self.CFG, generations=0), 3, tiny_trial())
        assert len(res.history) == 1
        assert res.champion.fitness == res.initial_best
        assert res.champion.meta["generation"] == 0

    def test_champion_is_best_ever(self):
        res = evolve(self.CFG, 1, tiny_trial())
        assert res.champion.fitness == max(s.best_fitness for s in res.history)
        assert res.log_csv().splitlines()[0] == "generation,best_fitness,mean_fitness,species_count"
        assert len(res.log_csv().splitlines()) == self.CFG.generations + 2

    def test_invariants_per_generation(self):
        seen: dict[int, tuple[int, int]] = {}

        def check(gen, population, species):
            members = sorted(i for s in species for i in s.members)
            assert members == list(range(len(population)))
            for g in population:
                for c in g.connections:
                    assert seen.setdefault(c.innovation, (c.from_id, c.to_id)) == (c.from_id, c.to_id)

        cfg = replace(self.CFG, add_node_rate=0.3, add_connection_rate=0.3)
        evolve(cfg, 2, tiny_trial(), on_generation=check)

    def test_stagnation_restart(self):
        cfg = replace(self.CFG, stagnation_limit=1, species_elitism=0, generations=4)
        # nothing can be collected in 2 ticks, so fitness never improves
        res = evolve(cfg, 0, TrialConfig(arena=ArenaConfig(trial_ticks=2)))
        assert res.events and "restart" in res.events[0]
        assert len(res.population) == cfg.population_size

    def test_smoke_profile(self):
        s = smoke_profile()
        assert (s.population_size, s.generations) == (50, 30)

    @pytest.mark.parametrize("change", [{"population_size": 1}, {"crossover_rate": 1.5},
                                        {"distribution_mode": "maze"}, {"trial_seeds_per_eval": 0}])
    def test_config_validation(self, change):
        with pytest.raises(ConfigurationError):
            EvolutionConfig(**change)
