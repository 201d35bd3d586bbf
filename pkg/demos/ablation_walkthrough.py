"""Evolve a small controller, then see which input groups it relies on.

Run from the repository root:

    python3 demos/ablation_walkthrough.py

Takes roughly a minute on one core.
"""

from dataclasses import replace

import numpy as np

from foragelab.ablation import ablation_sweep
from foragelab.channels import GROUPS
from foragelab.evolution import evolve, smoke_profile
from foragelab.simulation import TrialConfig
from foragelab.stats import mann_whitney_u, relative_drop, significant_drop

trial = TrialConfig()
cfg = replace(smoke_profile(), distribution_mode="uniform")

print(f"evolving: population {cfg.population_size}, {cfg.generations} generations")
result = evolve(cfg, 0, trial)
for s in result.history[::5]:
    print(f"  gen {s.generation:3d}  best {s.best_fitness:6.2f}  mean {s.mean_fitness:6.2f}  species {s.species_count}")
champ = result.champion
print(f"champion fitness {champ.fitness:g} (initial best {result.initial_best:g}), "
      f"{len(champ.nodes)} nodes, {sum(c.enabled for c in champ.connections)} enabled links")

sweep = ablation_sweep(champ, trial, range(10))
base = sweep.finals()
print(f"\nbaseline deliveries over 10 seeds: {base} (median {np.median(base):g})")
print(f"{'disabled group':16s} {'median':>7s} {'drop':>6s} {'p':>8s}  significant")
for g in GROUPS:
    fin = sweep.finals(g)
    p = mann_whitney_u(base, fin).p_value
    print(f"{g.value:16s} {np.median(fin):7g} {relative_drop(base, fin):6.2f} {p:8.3g}  {significant_drop(base, fin)}")
