"""Independent reference implementations used as test oracles.

Nothing here imports foragelab; each oracle follows the textbook definition
as directly as possible, trading speed for obviousness.
"""

from __future__ import annotations

import itertools
import math
from decimal import Decimal, getcontext


def sigmoid_decimal(x: float, slope: float = 4.9, digits: int = 40) -> float:
    getcontext().prec = digits
    return float(1 / (1 + (-(Decimal(str(slope)) * Decimal(str(x)))).exp()))


def brute_network(nodes: dict[int, str], links: list[tuple[int, int, float, bool]],
                  inputs: list[float], passes: int, slope: float = 4.9,
                  state: dict[int, float] | None = None) -> tuple[list[float], dict[int, float]]:
    """Pass-by-pass synchronous evaluation with plain dicts.

    Every pass reads the previous pass's activations, inputs clamped and bias
    at 1. Non-input nodes start at 0.5 unless ``state`` says otherwise.
    """
    input_ids = sorted(i for i, k in nodes.items() if k == "input")
    output_ids = sorted(i for i, k in nodes.items() if k == "output")
    free = [i for i, k in nodes.items() if k in ("hidden", "output")]
    act = {i: 0.0 for i in nodes}
    for i in free:
        act[i] = 0.5 if state is None else state[i]
    for _ in range(passes):
        for i, v in zip(input_ids, inputs):
            act[i] = v
        for i, k in nodes.items():
            if k == "bias":
                act[i] = 1.0
        prev = dict(act)
        for j in free:
            total = 0.0
            for a, b, w, on in links:
                if on and b == j:
                    total += w * prev[a]
            act[j] = 1.0 / (1.0 + math.exp(-slope * total))
    return [act[i] for i in output_ids], {i: act[i] for i in free}


def feedforward(nodes: dict[int, str], links: list[tuple[int, int, float, bool]],
                inputs: list[float], slope: float = 4.9) -> list[float]:
    """Classic topological-order evaluation of an acyclic network."""
    input_ids = sorted(i for i, k in nodes.items() if k == "input")
    val = {i: v for i, v in zip(input_ids, inputs)}
    for i, k in nodes.items():
        if k == "bias":
            val[i] = 1.0
    pending = [i for i, k in nodes.items() if k in ("hidden", "output")]
    while pending:
        for j in list(pending):
            srcs = [(a, w) for a, b, w, on in links if on and b == j]
            if all(a in val for a, _ in srcs):
                val[j] = 1.0 / (1.0 + math.exp(-slope * sum(w * val[a] for a, w in srcs)))
                pending.remove(j)
    return [val[i] for i in sorted(i for i, k in nodes.items() if k == "output")]


def longest_path(nodes: dict[int, str], links: list[tuple[int, int, float, bool]]) -> int:
    edges = [(a, b) for a, b, _, on in links if on]
    depth = {i: 0 for i in nodes}
    for _ in range(len(nodes)):
        for a, b in edges:
            depth[b] = max(depth[b], depth[a] + 1)
    return max(depth.values())


def mann_whitney_brute(x: list[float], y: list[float]) -> tuple[float, float]:
    """U by explicit pair counting; two-sided normal approximation p-value.

    Uses the tie-corrected variance and a 0.5 continuity correction.
    """
    n1, n2 = len(x), len(y)
    u = 0.0
    for a in x:
        for b in y:
            u += 1.0 if a > b else (0.5 if a == b else 0.0)
    n = n1 + n2
    pooled = list(x) + list(y)
    tie_term = sum(c ** 3 - c for c in (pooled.count(v) for v in set(pooled)))
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var == 0:
        return u, 1.0
    mu = n1 * n2 / 2.0
    z = (abs(u - mu) - 0.5) / math.sqrt(var)
    z = max(z, 0.0)
    p = math.erfc(z / math.sqrt(2.0))
    return u, min(1.0, p)


def u_by_ranks(x: list[float], y: list[float]) -> float:
    """U from the rank-sum formula, with mid-ranks for ties."""
    pooled = sorted(list(x) + list(y))
    ranks = {}
    for v in set(pooled):
        positions = [i + 1 for i, p in enumerate(pooled) if p == v]
        ranks[v] = sum(positions) / len(positions)
    r1 = sum(ranks[v] for v in x)
    return r1 - len(x) * (len(x) + 1) / 2.0


def halving_sizes(total: int) -> list[int]:
    """Sizes total/2, total/4, ... (integer halves) then singletons up to total."""
    sizes = []
    s = total // 2
    while s >= 1 and sum(sizes) + s <= total:
        sizes.append(s)
        s //= 2
    while sum(sizes) < total:
        sizes.append(1)
    return sizes


def arc_step(x: float, y: float, th: float, vl: float, vr: float, scale: float, base: float,
             dt: float) -> tuple[float, float, float]:
    """Exact differential-drive arc, written from the textbook ICC form."""
    v = scale * (vl + vr) / 2.0
    w = scale * (vr - vl) / base
    if w == 0:
        return x + v * dt * math.cos(th), y + v * dt * math.sin(th), th
    r = v / w
    icc_x = x - r * math.sin(th)
    icc_y = y + r * math.cos(th)
    a = w * dt
    nx = math.cos(a) * (x - icc_x) - math.sin(a) * (y - icc_y) + icc_x
    ny = math.sin(a) * (x - icc_x) + math.cos(a) * (y - icc_y) + icc_y
    return nx, ny, th + a


def best_subsets(per_group: dict[str, int], groups: list[str]) -> list[frozenset[str]]:
    """Subsets S whose deterministic delivery count is positive, such that
    removing any member lowers it and adding any outsider leaves it unchanged.

    With seed-independent counts that is exactly what a minimal sufficient
    set means for the mock controller.
    """
    def count(s):
        return sum(per_group.get(g, 0) for g in s)

    found = []
    for r in range(1, len(groups) + 1):
        for combo in itertools.combinations(groups, r):
            s = frozenset(combo)
            base = count(s)
            if base == 0:
                continue
            if any(count(s - {g}) >= base * 0.8 for g in s):
                continue
            if any(abs(count(s | {g}) - base) >= 0.2 * base for g in groups if g not in s):
                continue
            found.append(s)
    return found
