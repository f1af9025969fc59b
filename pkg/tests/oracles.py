"""Independent oracles for verifying the simulators and statistics.

Nothing in here shares code with the production paths: enumeration walks
the decision tree recursively, K-S is recomputed by a dense integer scan,
reachability by a plain BFS.  Keep it that way -- these exist so the fast
implementations have something independent to be checked against.
"""

from __future__ import annotations

from fractions import Fraction

from cascade_lab.graphs import Graph
from cascade_lab.stats import SizeHistogram


def reachable_set_size(g: Graph, start: int) -> int:
    seen = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for u in frontier:
            for v in g.neighbors(u):
                v = int(v)
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    return len(seen)


def enumerate_alpha_family(
    g: Graph, alpha: float, start: int, decay: bool
) -> dict[tuple[int, int], float]:
    """Exact distribution of (spreaders, rounds) for model alpha / alpha^k.

    Recursively branches on each newly informed node's single spreading
    decision.  Exponential in the reachable set; callers keep fixtures
    small (<= ~12 decision sites).
    """
    results: dict[tuple[int, int], float] = {}

    def step(frontier: tuple[int, ...], informed: frozenset[int],
             spreaders: int, rounds: int, k: int, prob: float) -> None:
        newly: list[int] = []
        seen = set()
        for u in frontier:
            for v in g.neighbors(u):
                v = int(v)
                if v not in informed and v not in seen:
                    seen.add(v)
                    newly.append(v)
        if not newly:
            key = (spreaders, rounds)
            results[key] = results.get(key, 0.0) + prob
            return
        p = alpha ** float(k) if decay else alpha
        informed2 = informed | seen
        m = len(newly)
        for bits in range(1 << m):
            pr = prob
            spread = []
            for i in range(m):
                if bits >> i & 1:
                    pr *= p
                    spread.append(newly[i])
                else:
                    pr *= 1.0 - p
            if pr == 0.0:
                continue
            step(tuple(spread), informed2, spreaders + len(spread), k, k + 1, pr)

    step((start,), frozenset([start]), 1, 0, 1, 1.0)
    return results


def enumerate_cgm(g: Graph, alpha: float, start: int) -> dict[tuple[int, int], float]:
    """Exact (informed, rounds) distribution for CGM.

    Branches on every (informer, neighbor) decision, including decisions
    aimed at already-informed neighbors (they consume a draw but cannot
    change the informed set).
    """
    results: dict[tuple[int, int], float] = {}

    def step(frontier: tuple[int, ...], informed: frozenset[int],
             rounds: int, k: int, prob: float) -> None:
        edges: list[int] = []
        for u in frontier:
            edges.extend(int(v) for v in g.neighbors(u))
        if not edges:
            key = (len(informed), rounds)
            results[key] = results.get(key, 0.0) + prob
            return
        m = len(edges)
        for bits in range(1 << m):
            pr = prob
            newly: list[int] = []
            seen = set()
            for i in range(m):
                if bits >> i & 1:
                    pr *= alpha
                    v = edges[i]
                    if v not in informed and v not in seen:
                        seen.add(v)
                        newly.append(v)
                else:
                    pr *= 1.0 - alpha
            if pr == 0.0:
                continue
            if newly:
                step(tuple(newly), informed | seen, k, k + 1, pr)
            else:
                key = (len(informed), rounds)
                results[key] = results.get(key, 0.0) + pr

    step((start,), frozenset([start]), 0, 1, 1.0)
    return results


def size_distribution(joint: dict[tuple[int, int], float]) -> dict[int, float]:
    out: dict[int, float] = {}
    for (size, _rounds), p in joint.items():
        out[size] = out.get(size, 0.0) + p
    return out


def brute_force_ks(a: SizeHistogram, b: SizeHistogram) -> tuple[Fraction, int]:
    """K-S by scanning every integer size in [1, max support]; exact.

    The reported location is the smallest *support* point achieving the
    maximum (between support points the step CDFs are flat, so scanning
    non-support integers can only repeat already-seen differences).
    """
    ta, tb = a.total, b.total
    support = set(a.counts) | set(b.counts)
    hi = max(support)
    best = Fraction(-1)
    best_loc = None
    ca = cb = 0
    for x in range(1, hi + 1):
        ca += a.counts.get(x, 0)
        cb += b.counts.get(x, 0)
        d = abs(Fraction(ca, ta) - Fraction(cb, tb))
        if d > best:
            best = d
            best_loc = None  # value improved; relocate at next support point
        if best_loc is None and x in support and d == best:
            best_loc = x
    return best, best_loc


def ks_between(a: SizeHistogram, b: SizeHistogram) -> float:
    from cascade_lab.stats import ks_statistic, to_cdf

    return ks_statistic(to_cdf(a), to_cdf(b)).statistic


def instrumented_alpha_family(
    g: Graph, alpha: float, start: int, uniforms: dict[int, float], decay: bool
) -> set[int]:
    """Spreader set when node v's decision compares uniforms[v] < alpha^k.

    Used for the monotone-coupling property: larger alpha (same uniforms)
    must produce a superset of spreaders.
    """
    informed = {start}
    spreaders = {start}
    frontier = [start]
    k = 0
    while frontier:
        k += 1
        p = alpha ** float(k) if decay else alpha
        nxt = []
        for u in frontier:
            for v in g.neighbors(u):
                v = int(v)
                if v not in informed:
                    informed.add(v)
                    if uniforms[v] < p:
                        spreaders.add(v)
                        nxt.append(v)
        frontier = nxt
    return spreaders
