"""Step one trial tick by tick and watch what robot 0 does.

Uses the checked-in test champion, so no evolution is needed:

    python3 demos/replay_inspection.py [mask]

The optional mask uses the CLI syntax, e.g. ``pheromone`` or ``nestlight:off:1``.
"""

import sys
from pathlib import Path

from foragelab.channels import parse_mask
from foragelab.config import RunConfig
from foragelab.cli import replay_trace
from foragelab.netcontrol import load_genome

genome = load_genome(Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "champion_uniform.json")
mask = sys.argv[1] if len(sys.argv) > 1 else "all"
parse_mask(mask)  # fail early on a typo

rows, world = replay_trace(genome, RunConfig(), seed=0, mask_text=mask, distribution="uniform")

# rows: tick, x, y, theta, holding, delivered, laid_pheromone
pickups = [r[0] for prev, r in zip(rows, rows[1:]) if r[4] and not prev[4]]
drops = [r[0] for prev, r in zip(rows, rows[1:]) if r[5] > prev[5]]
laid = sum(1 for r in rows if r[6])
print(f"mask {mask!r}: {len(rows) - 1} ticks")
print(f"robot 0 picked up at ticks {pickups[:8]}{' ...' if len(pickups) > 8 else ''}")
print(f"robot 0 delivered at ticks {drops[:8]}{' ...' if len(drops) > 8 else ''}")
print(f"robot 0 laid {laid} pheromone marks")
if pickups and drops:
    print(f"first trip: picked {pickups[0]}, delivered {drops[0]}, {drops[0] - pickups[0]} ticks carrying")
print(f"swarm total delivered: {world.delivered}")
