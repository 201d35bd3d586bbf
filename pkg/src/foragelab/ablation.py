"""Input-ablation trials, per-group sweeps and sufficient-minimal-set analysis.

Every comparison is seed-paired: a variant is run on exactly the seeds of its
baseline, and world construction never looks at the mask, so any difference
in final counts comes from the disabled inputs alone.

A *controller* here is either a :class:`~foragelab.netcontrol.Genome` or any
callable ``(mask, seed, config) -> EfficiencyCurve``; :class:`MockController`
is the latter kind and lets the set-search logic be checked against exact
answers.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence, Union

import numpy as np

from .channels import GROUPS, AblationMask, ChannelGroup, sort_groups
from .errors import ConfigurationError, ContractViolation
from .netcontrol import Genome, Network, genome_from_dict, parse_json_bytes
from .simulation import TrialConfig, simulate
from .stats import relative_change, significant_change, significant_drop

MOCK_SCHEMA = "forage-lab/mock-controller"
REPORT_SCHEMA = "forage-lab/minimal-set-report"

TrialFn = Callable[[AblationMask, int, TrialConfig], "EfficiencyCurve"]
Controller = Union[Genome, Network, TrialFn]


@dataclass(frozen=True)
class EfficiencyCurve:
    trial_seed: int
    samples: tuple[tuple[int, int], ...]
    final_count: int
    layout_fingerprint: str = ""

    def __post_init__(self):
        counts = [c for _, c in self.samples]
        if any(b < a for a, b in zip(counts, counts[1:])):
            raise ContractViolation("efficiency curve must be non-decreasing")
        if counts and counts[-1] != self.final_count:
            raise ContractViolation("final_count must equal the last sample")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tick", "delivered"])
        w.writerows(self.samples)
        return buf.getvalue()


def sample_ticks(ticks: int, stride: int) -> list[int]:
    out = list(range(0, ticks + 1, stride))
    if out[-1] != ticks:
        out.append(ticks)
    return out


@dataclass(frozen=True)
class MockController:
    """Delivers ``sum(per_group[g] for enabled g)`` resources on every seed.

    Deliveries happen in the final tick; the curve is flat before it.
    """

    per_group: Mapping[ChannelGroup, int]

    def __call__(self, mask: AblationMask, seed: int, config: TrialConfig) -> EfficiencyCurve:
        count = int(sum(v for g, v in self.per_group.items() if mask.is_enabled(g)))
        ticks = config.arena.trial_ticks
        samples = tuple((t, count if t == ticks else 0) for t in sample_ticks(ticks, config.sample_stride))
        return EfficiencyCurve(seed, samples, count)

    def to_dict(self) -> dict[str, Any]:
        return {"schema": MOCK_SCHEMA, "schema_version": 1,
                "deliveries_per_group": {g.value: int(self.per_group[g]) for g in sort_groups(self.per_group)}}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> MockController:
        raw = data.get("deliveries_per_group")
        if not isinstance(raw, dict):
            raise ConfigurationError("mock controller needs a 'deliveries_per_group' object")
        return cls({ChannelGroup.parse(k): int(v) for k, v in raw.items()})


def load_controller(path: str | Path) -> Genome | MockController:
    """Load a genome file, or a mock-controller file used as a test fixture."""
    raw = Path(path).read_bytes()
    data = parse_json_bytes(raw, "controller file")
    if isinstance(data, dict) and data.get("schema") == MOCK_SCHEMA:
        return MockController.from_dict(data)
    genome = genome_from_dict(data)
    genome.check_interface()
    return genome


def run_trial(controller: Controller, mask: AblationMask, seed: int, config: TrialConfig) -> EfficiencyCurve:
    """One masked trial sampled every ``config.sample_stride`` ticks."""
    if not isinstance(controller, (Genome, Network)):
        return controller(mask, seed, config)
    out = simulate(controller, mask, seed, config)
    ticks = sample_ticks(config.arena.trial_ticks, config.sample_stride)
    samples = tuple((t, int(out.delivered_by_tick[t])) for t in ticks)
    return EfficiencyCurve(seed, samples, out.delivered, out.layout_fingerprint)


def _prepare(controller: Controller) -> Controller:
    # compile once; every trial in a sweep shares the network
    return Network(controller) if isinstance(controller, Genome) else controller


def mean_curve(curves: Sequence[EfficiencyCurve]) -> list[tuple[int, float]]:
    ticks = [t for t, _ in curves[0].samples]
    values = np.mean([[c for _, c in cur.samples] for cur in curves], axis=0)
    return [(t, float(v)) for t, v in zip(ticks, values)]


@dataclass
class SweepResult:
    seeds: list[int]
    baseline: list[EfficiencyCurve]
    by_group: dict[ChannelGroup, list[EfficiencyCurve]]
    constants: dict[ChannelGroup, float]

    def finals(self, group: ChannelGroup | None = None) -> list[int]:
        curves = self.baseline if group is None else self.by_group[group]
        return [c.final_count for c in curves]

    @property
    def trial_count(self) -> int:
        return len(self.baseline) + sum(len(v) for v in self.by_group.values())

    def summary_rows(self) -> list[tuple[str, int, int]]:
        rows = [("baseline", c.trial_seed, c.final_count) for c in self.baseline]
        for g in sort_groups(self.by_group):
            rows += [(g.value, c.trial_seed, c.final_count) for c in self.by_group[g]]
        return rows

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["group", "seed", "final_count"])
        w.writerows(self.summary_rows())
        return buf.getvalue()

    def ranking(self) -> list[tuple[ChannelGroup, float]]:
        """Groups by mean final count when disabled, most damaging first."""
        means = [(g, float(np.mean(self.finals(g)))) for g in sort_groups(self.by_group)]
        return sorted(means, key=lambda t: t[1])


def ablation_sweep(controller: Controller, config: TrialConfig, seeds: Sequence[int],
                   constants: Mapping[ChannelGroup, float] | None = None,
                   groups: Iterable[ChannelGroup] = GROUPS) -> SweepResult:
    """Baseline plus one single-group-disabled run per (group, seed)."""
    if len(seeds) < 1:
        raise ConfigurationError("ablation sweep needs at least one seed")
    consts = dict(constants or {})
    ctl = _prepare(controller)
    baseline = [run_trial(ctl, AblationMask(frozenset(), consts), s, config) for s in seeds]
    by_group = {}
    for g in groups:
        mask = AblationMask(frozenset([g]), consts)
        by_group[g] = [run_trial(ctl, mask, s, config) for s in seeds]
    return SweepResult(list(seeds), baseline, by_group, consts)


class Verdict(str, Enum):
    SUFFICIENT_AND_MINIMAL = "sufficient_and_minimal"
    NOT_SUFFICIENT = "not_sufficient"
    NOT_MINIMAL = "not_minimal"


@dataclass
class VariantStats:
    finals: list[int]
    significant: bool
    relative_change: float


@dataclass
class MinimalSetReport:
    candidate_set: frozenset[ChannelGroup]
    seeds: list[int]
    baseline_final: list[int]
    remove_one: dict[ChannelGroup, VariantStats]
    add_one: dict[ChannelGroup, VariantStats]
    verdict: Verdict
    alpha: float
    min_rel_drop: float
    mean_curves: dict[str, list[tuple[int, float]]] = field(default_factory=dict)
    search_trace: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        def variants(d: Mapping[ChannelGroup, VariantStats]) -> dict[str, Any]:
            return {g.value: {"finals": v.finals, "significant": v.significant,
                              "relative_change": _json_float(v.relative_change)}
                    for g, v in ((g, d[g]) for g in sort_groups(d))}
        return {
            "schema": REPORT_SCHEMA,
            "schema_version": 1,
            "candidate_set": [g.value for g in sort_groups(self.candidate_set)],
            "verdict": self.verdict.value,
            "alpha": self.alpha,
            "min_rel_drop": self.min_rel_drop,
            "seeds": self.seeds,
            "baseline_final": self.baseline_final,
            "remove_one": variants(self.remove_one),
            "add_one": variants(self.add_one),
            "search_trace": self.search_trace,
            "mean_curves": {k: [[t, v] for t, v in curve] for k, curve in self.mean_curves.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


def _json_float(v: float) -> float | str:
    return v if np.isfinite(v) else ("inf" if v > 0 else "-inf")


def _finals(ctl: Controller, enabled: Iterable[ChannelGroup], config: TrialConfig, seeds: Sequence[int],
            constants: Mapping[ChannelGroup, float]) -> list[EfficiencyCurve]:
    mask = AblationMask.only(enabled, constants)
    return [run_trial(ctl, mask, s, config) for s in seeds]


def minimal_set_check(controller: Controller, candidate_set: Iterable[ChannelGroup], config: TrialConfig,
                      seeds: Sequence[int], alpha: float = 0.05, min_rel_drop: float = 0.2,
                      constants: Mapping[ChannelGroup, float] | None = None) -> MinimalSetReport:
    """Remove-one / add-one test of a candidate input set.

    The baseline enables exactly ``candidate_set``. Verdicts:

    * ``not_sufficient``: nothing is delivered, or enabling one more group
      changes the finals significantly (the set is missing something);
    * ``not_minimal``: some removal is not a significant drop;
    * ``sufficient_and_minimal``: otherwise.
    """
    cand = frozenset(candidate_set)
    if not cand:
        raise ConfigurationError("candidate set must be non-empty")
    consts = dict(constants or {})
    ctl = _prepare(controller)
    base_curves = _finals(ctl, cand, config, seeds, consts)
    base = [c.final_count for c in base_curves]
    curves = {"baseline": mean_curve(base_curves)}
    remove_one = {}
    for g in sort_groups(cand):
        cur = _finals(ctl, cand - {g}, config, seeds, consts)
        fin = [c.final_count for c in cur]
        remove_one[g] = VariantStats(fin, significant_drop(base, fin, alpha, min_rel_drop),
                                     relative_change(base, fin))
        curves[f"-{g.value}"] = mean_curve(cur)
    add_one = {}
    for g in sort_groups(set(GROUPS) - cand):
        cur = _finals(ctl, cand | {g}, config, seeds, consts)
        fin = [c.final_count for c in cur]
        add_one[g] = VariantStats(fin, significant_change(base, fin, alpha, min_rel_drop),
                                  relative_change(base, fin))
        curves[f"+{g.value}"] = mean_curve(cur)
    if float(np.median(base)) == 0.0 or any(v.significant for v in add_one.values()):
        verdict = Verdict.NOT_SUFFICIENT
    elif not all(v.significant for v in remove_one.values()):
        verdict = Verdict.NOT_MINIMAL
    else:
        verdict = Verdict.SUFFICIENT_AND_MINIMAL
    return MinimalSetReport(cand, list(seeds), base, remove_one, add_one, verdict, alpha, min_rel_drop, curves)


def greedy_minimal_search(controller: Controller, config: TrialConfig, seeds: Sequence[int],
                          alpha: float = 0.05, min_rel_drop: float = 0.2,
                          constants: Mapping[ChannelGroup, float] | None = None) -> MinimalSetReport:
    """Backward elimination from all six groups.

    While some removal is not a significant drop, drop the group whose
    removal moves the median final count least (ties: canonical order). Stops
    at one group. The returned report's verdict says whether the result is a
    sufficient minimal set; any other verdict is the search's failure report.
    """
    consts = dict(constants or {})
    ctl = _prepare(controller)
    current = set(GROUPS)
    trace = []
    while True:
        base = [c.final_count for c in _finals(ctl, current, config, seeds, consts)]
        candidates = []
        for g in sort_groups(current):
            fin = [c.final_count for c in _finals(ctl, current - {g}, config, seeds, consts)]
            if not significant_drop(base, fin, alpha, min_rel_drop):
                candidates.append((abs(relative_change(base, fin)), GROUPS.index(g), g))
        if not candidates or len(current) == 1:
            break
        _, _, drop = min(candidates)
        current.discard(drop)
        trace.append(f"removed {drop.value}")
    report = minimal_set_check(ctl, current, config, seeds, alpha, min_rel_drop, consts)
    report.search_trace = trace
    return report


def exhaustive_minimal_sets(controller: Controller, config: TrialConfig, seeds: Sequence[int],
                            alpha: float = 0.05, min_rel_drop: float = 0.2,
                            constants: Mapping[ChannelGroup, float] | None = None
                            ) -> list[frozenset[ChannelGroup]]:
    """Every non-empty subset whose verdict is sufficient_and_minimal (63 checks)."""
    ctl = _prepare(controller)
    found = []
    for bits in range(1, 1 << len(GROUPS)):
        subset = frozenset(g for i, g in enumerate(GROUPS) if bits >> i & 1)
        rep = minimal_set_check(ctl, subset, config, seeds, alpha, min_rel_drop, constants)
        if rep.verdict is Verdict.SUFFICIENT_AND_MINIMAL:
            found.append(subset)
    return found

