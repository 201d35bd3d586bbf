"""``forage-lab`` command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime error
(unreadable or malformed inputs, interface mismatch, I/O failure).

The output directory is ``--out`` if given, else ``$FORAGE_LAB_OUT``, else
``io.output_dir`` from the config.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .ablation import (SweepResult, ablation_sweep, greedy_minimal_search, load_controller,
                       mean_curve, minimal_set_check)
from .channels import GROUPS, parse_group_set, parse_mask, sort_groups
from .config import RunConfig, load_config, with_smoke_profile
from .errors import ConfigurationError, ForageLabError, InsufficientSamplesError
from .evolution import evolve
from .netcontrol import Genome, Network, control_tick, dumps_genome, load_genome
from .plotting import write_line_chart
from .simulation import initial_world
from .stats import relative_change, significant_drop
from .world import DISTRIBUTIONS, step_with_events

OUT_ENV = "FORAGE_LAB_OUT"
MANIFEST = "manifest.json"
MANIFEST_SCHEMA = "forage-lab/manifest"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# -- helpers ----------------------------------------------------------------------

def _sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _out_dir(args: argparse.Namespace, cfg: RunConfig) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or cfg.io.output_dir)


def _write(root: Path, rel: str, text: str) -> None:
    path = root / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def write_manifest(path: Path, *, command: str, options: dict[str, Any], cfg: RunConfig,
                   master_seed: int | None, genome_sha256: str | None, outputs: Sequence[str]) -> None:
    """Reproducibility record, written before any result file.

    Only path-independent facts go in: re-running the same command elsewhere
    yields the same manifest bytes.
    """
    record = {
        "schema": MANIFEST_SCHEMA,
        "schema_version": 1,
        "tool_version": __version__,
        "command": command,
        "options": options,
        "config_sha256": cfg.sha256(),
        "master_seed": master_seed,
        "input_genome_sha256": genome_sha256,
        "wall_clock_budget_s": cfg.io.wall_clock_budget_s,
        "outputs": sorted(outputs),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record, indent=2) + "\n")


def _seeds(args: argparse.Namespace, cfg: RunConfig) -> list[int]:
    if args.seeds is not None:
        if args.seeds < 1:
            raise UsageError("--seeds must be >= 1")
        return list(range(args.seeds))
    return cfg.ablation.seed_list()


def _distribution(args: argparse.Namespace, cfg: RunConfig, controller: Any) -> str:
    if args.distribution:
        return args.distribution
    if cfg.ablation.distribution:
        return cfg.ablation.distribution
    meta_dist = controller.meta.get("distribution") if isinstance(controller, Genome) else None
    return meta_dist if meta_dist in DISTRIBUTIONS else cfg.evolution.distribution_mode


def _csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v: float) -> str:
    return repr(float(v)) if np.isfinite(v) else ("inf" if v > 0 else "-inf")


# -- commands -----------------------------------------------------------------------

def cmd_evolve(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.profile == "smoke":
        cfg = with_smoke_profile(cfg)
    dist = args.distribution or cfg.evolution.distribution_mode
    evo = replace(cfg.evolution, distribution_mode=dist)
    out = _out_dir(args, cfg)
    outputs = [MANIFEST, "champion.genome.json", "generations.csv"]
    write_manifest(out / MANIFEST, command="evolve",
                   options={"distribution": dist, "seed": args.seed, "profile": args.profile},
                   cfg=cfg, master_seed=args.seed, genome_sha256=None, outputs=outputs)
    result = evolve(evo, args.seed, cfg.trial_config(dist))
    _write(out, "champion.genome.json", dumps_genome(result.champion))
    _write(out, "generations.csv", result.log_csv())
    print(f"champion fitness {result.champion.fitness:g} (initial best {result.initial_best:g}); "
          f"wrote {out}")
    return 0


def _ranking_csv(sweep: SweepResult, alpha: float, min_rel_drop: float) -> str:
    base = sweep.finals()
    rows = []
    for g, mean in sweep.ranking():
        fin = sweep.finals(g)
        try:
            sig = str(significant_drop(base, fin, alpha, min_rel_drop)).lower()
        except InsufficientSamplesError:
            sig = ""
        rows.append([g.value, g.label, _fmt(mean), _fmt(float(np.median(fin))),
                     _fmt(relative_change(base, fin)), sig])
    return _csv(["group", "label", "mean_final", "median_final", "relative_change", "significant_drop"], rows)


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    controller = load_controller(args.genome)
    seeds = _seeds(args, cfg)
    dist = _distribution(args, cfg, controller)
    trial = cfg.trial_config(dist)
    out = _out_dir(args, cfg)
    curve_files = {(name, s): f"curves/{name}_seed{s}.csv"
                   for name in ["baseline"] + [g.value for g in GROUPS] for s in seeds}
    plots = {g: f"plots/{g.value}.svg" for g in GROUPS} if cfg.io.plots else {}
    outputs = [MANIFEST, "summary.csv", "ranking.csv", "mean_curves.csv", *curve_files.values(),
               *plots.values()]
    write_manifest(out / MANIFEST, command="ablate",
                   options={"seeds": seeds, "distribution": dist}, cfg=cfg, master_seed=None,
                   genome_sha256=_sha256(args.genome), outputs=outputs)

    sweep = ablation_sweep(controller, trial, seeds, cfg.ablation.constants())
    _write(out, "summary.csv", sweep.summary_csv())
    _write(out, "ranking.csv", _ranking_csv(sweep, cfg.ablation.alpha, cfg.ablation.min_rel_drop))
    by_name = {"baseline": sweep.baseline, **{g.value: sweep.by_group[g] for g in GROUPS}}
    for (name, s), rel in curve_files.items():
        curve = next(c for c in by_name[name] if c.trial_seed == s)
        _write(out, rel, curve.to_csv())
    means = {name: mean_curve(curves) for name, curves in by_name.items()}
    ticks = [t for t, _ in means["baseline"]]
    rows = [[t, *(_fmt(means[n][i][1]) for n in by_name)] for i, t in enumerate(ticks)]
    _write(out, "mean_curves.csv", _csv(["tick", *by_name], rows))
    for g, rel in plots.items():
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        write_line_chart(path, f"{g.label} disabled ({dist}, {len(seeds)} seeds)", "tick",
                         "cumulative resources delivered",
                         [("baseline", means["baseline"]), (f"without {g.label}", means[g.value])])
    for g, mean in sweep.ranking():
        print(f"{g.value:15s} mean final {mean:8.2f}   (baseline {np.mean(sweep.finals()):.2f})")
    return 0


def cmd_minimal(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    candidate = parse_group_set(args.set) if args.set is not None else None
    if candidate is not None and not candidate:
        raise UsageError("--set needs at least one group name")
    controller = load_controller(args.genome)
    seeds = _seeds(args, cfg)
    dist = _distribution(args, cfg, controller)
    trial = cfg.trial_config(dist)
    out = _out_dir(args, cfg)
    outputs = [MANIFEST, "report.json"] + (["combined.svg"] if cfg.io.plots else [])
    options = {"seeds": seeds, "distribution": dist,
               "set": None if candidate is None else [g.value for g in sort_groups(candidate)],
               "search": candidate is None}
    write_manifest(out / MANIFEST, command="minimal", options=options, cfg=cfg, master_seed=None,
                   genome_sha256=_sha256(args.genome), outputs=outputs)
    ab = cfg.ablation
    if candidate is None:
        report = greedy_minimal_search(controller, trial, seeds, ab.alpha, ab.min_rel_drop, ab.constants())
    else:
        report = minimal_set_check(controller, candidate, trial, seeds, ab.alpha, ab.min_rel_drop,
                                   ab.constants())
    _write(out, "report.json", report.to_json())
    if cfg.io.plots:
        labels = {g.value: g.label for g in GROUPS}
        series = []
        for key, curve in report.mean_curves.items():
            if key == "baseline":
                name = "{" + ", ".join(labels[g.value] for g in sort_groups(report.candidate_set)) + "}"
            else:
                name = ("without " if key[0] == "-" else "with ") + labels[key[1:]]
            series.append((name, curve))
        write_line_chart(out / "combined.svg", f"Candidate set: {report.verdict.value}", "tick",
                         "cumulative resources delivered", series)
    names = ", ".join(g.value for g in sort_groups(report.candidate_set))
    print(f"{{{names}}}: {report.verdict.value}")
    return 0


def replay_trace(genome: Genome, cfg: RunConfig, seed: int, mask_text: str, distribution: str):
    """Drive one trial through the per-tick Python API; returns (rows, final world).

    Rows follow robot 0; ``delivered`` is the swarm total.
    """
    trial = cfg.trial_config(distribution)
    mask = parse_mask(mask_text, cfg.ablation.constants())
    net = Network(genome)
    world = initial_world(seed, trial)
    states = [None] * world.n_robots
    laid = np.zeros(world.n_robots, dtype=bool)

    def row() -> list[Any]:
        x, y, th = world.pose[0]
        return [world.tick, repr(float(x)), repr(float(y)), repr(float(th)), int(world.holding[0]),
                world.delivered, int(laid[0])]

    rows = [row()]
    for _ in range(trial.arena.trial_ticks):
        commands = []
        for i in range(world.n_robots):
            cmd, states[i] = control_tick(net, states[i], world, i, mask, trial.network)
            commands.append(cmd)
        world, laid = step_with_events(world, commands)
        rows.append(row())
    return rows, world


def cmd_replay(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    mask = parse_mask(args.mask, cfg.ablation.constants())  # usage errors before any work
    genome = load_genome(args.genome)
    genome.check_interface()
    dist = _distribution(args, cfg, genome)
    trace = Path(args.trace)
    manifest = trace.with_name(trace.name + ".manifest.json")
    outputs = [manifest.name, trace.name] + ([Path(args.snapshot).name] if args.snapshot else [])
    write_manifest(manifest, command="replay",
                   options={"seed": args.seed, "mask": mask.to_string() or "all", "distribution": dist},
                   cfg=cfg, master_seed=args.seed, genome_sha256=_sha256(args.genome), outputs=outputs)
    rows, world = replay_trace(genome, cfg, args.seed, args.mask, dist)
    trace.parent.mkdir(parents=True, exist_ok=True)
    trace.write_text(_csv(["tick", "x", "y", "theta", "holding", "delivered", "laid_pheromone"], rows))
    if args.snapshot:
        Path(args.snapshot).write_text(world.to_json())
    print(f"{len(rows)} rows, delivered {world.delivered}, picked {world.picked}")
    return 0


# -- entry point -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="forage-lab", description="Evolve foraging controllers and ablate their inputs.")
    p.add_argument("--version", action="version", version=f"forage-lab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("evolve", help="evolve a champion controller")
    e.add_argument("config")
    e.add_argument("--distribution", choices=DISTRIBUTIONS)
    e.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    e.add_argument("--profile", choices=("default", "smoke"), default="default",
                   help="smoke: population 50, 30 generations")
    e.add_argument("--out")
    e.set_defaults(func=cmd_evolve)

    a = sub.add_parser("ablate", help="baseline plus one sweep per disabled input group")
    a.add_argument("genome")
    a.add_argument("config")
    a.add_argument("--seeds", type=int, help="use trial seeds 0..N-1 (default: config ablation.seeds)")
    a.add_argument("--distribution", choices=DISTRIBUTIONS)
    a.add_argument("--out")
    a.set_defaults(func=cmd_ablate)

    m = sub.add_parser("minimal", help="test or search for a sufficient minimal input set")
    m.add_argument("genome")
    m.add_argument("config")
    how = m.add_mutually_exclusive_group(required=True)
    how.add_argument("--set", help="comma-separated group names, e.g. 'holding,nest'")
    how.add_argument("--search", action="store_true", help="greedy backward elimination from all groups")
    m.add_argument("--seeds", type=int)
    m.add_argument("--distribution", choices=DISTRIBUTIONS)
    m.add_argument("--out")
    m.set_defaults(func=cmd_minimal)

    r = sub.add_parser("replay", help="write a per-tick trace of one trial")
    r.add_argument("genome")
    r.add_argument("config")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--mask", default="all", help="e.g. 'pheromone:off:1.0,compass:off'")
    r.add_argument("--trace", required=True, help="trace CSV path")
    r.add_argument("--snapshot", help="also write the final world state as JSON")
    r.add_argument("--distribution", choices=DISTRIBUTIONS)
    r.set_defaults(func=cmd_replay)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigurationError) as e:
        print(f"forage-lab {args.command}: error: {e}", file=sys.stderr)
        return 1
    except (ForageLabError, OSError) as e:
        print(f"forage-lab {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
