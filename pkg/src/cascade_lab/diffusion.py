"""Single-cascade simulators and the batch runner.

Four models walk the stored adjacency in synchronous rounds (the seed acts
at round 0, its neighbors are round 1):

* ``cgm``         -- every newly informed node makes one decision per direct
                     neighbor; cascade size is the informed count.
* ``alpha``       -- every newly informed node makes a single all-or-nothing
                     spreading decision with probability alpha; size is the
                     spreader count.  The seed always spreads.
* ``alpha_k``     -- like alpha, but a node first informed in round k spreads
                     with probability alpha**k.
* ``multi_exact`` -- alpha_k dynamics with a shared informed set plus
                     Poisson(lambda) spontaneous sources per live round; the
                     graph-level oracle for the compound fast path.

The functions here are straightforward Python and serve as the readable
reference; ``run_batch`` drives the compiled kernels in ``_kernels`` which
follow the exact same draw order (run i always consumes stream (seed, i)),
so batch results are reproducible at any worker count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._parallel import run_chunks
from .compound import PropertyTable, build_sampler
from .graphs import Graph
from .rng import RngStream
from .stats import SizeHistogram, histogram_from_sizes

MODELS = ("cgm", "alpha", "alpha_k", "multi_exact")

# Batch runs of model alpha are truncated here by default: the real-data
# tail above this size carries < 1e-3 probability, so capping does not
# move the K-S statistic while it avoids simulating near-global cascades.
DEFAULT_ALPHA_BATCH_SIZE_CAP = 1000

DEFAULT_MAX_ROUNDS = 10_000


@dataclass
class ModelParams:
    """Parameters shared by all models.

    size_cap: when set, a run reaching this many spreaders (informed nodes
    for CGM) stops and is recorded at the cap with ``truncated`` set.
    max_rounds: safety bound on rounds; exceeding it also truncates.
    """

    alpha: float
    max_rounds: int = DEFAULT_MAX_ROUNDS
    size_cap: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.size_cap is not None and self.size_cap < 1:
            raise ValueError("size_cap must be >= 1 when set")


@dataclass
class CascadeOutcome:
    spreaders: int
    informed: int
    rounds: int
    truncated: bool

    @property
    def size(self) -> int:
        """Model-specific cascade size (spreaders; equals informed for CGM)."""
        return self.spreaders


def _check_start(g: Graph, start: int) -> None:
    if start < 0 or start >= g.num_nodes:
        raise IndexError(f"start node {start} out of range for {g.num_nodes} nodes")


def simulate_cgm(g: Graph, params: ModelParams, start: int, rng: RngStream) -> CascadeOutcome:
    """Cascade generation model: per-neighbor independent informing decisions."""
    _check_start(g, start)
    offsets, nbrs = g.offsets, g.neighbors_array
    cap = params.size_cap or 0
    informed_set = {start}
    cur = [start]
    informed = 1
    rounds = 0
    truncated = False
    k = 0
    while cur:
        k += 1
        if k > params.max_rounds:
            truncated = True
            break
        nxt: list[int] = []
        capped = False
        for u in cur:
            for e in range(offsets[u], offsets[u + 1]):
                v = int(nbrs[e])
                # the informer decides for every neighbor, informed or not
                if rng.random() < params.alpha and v not in informed_set:
                    informed_set.add(v)
                    informed += 1
                    rounds = k
                    nxt.append(v)
                    if cap and informed >= cap:
                        capped = True
                        break
            if capped:
                break
        if capped:
            truncated = True
            break
        cur = nxt
    return CascadeOutcome(informed, informed, rounds, truncated)


def _simulate_alpha_family(
    g: Graph, params: ModelParams, start: int, rng: RngStream, decay: bool
) -> CascadeOutcome:
    _check_start(g, start)
    offsets, nbrs = g.offsets, g.neighbors_array
    cap = params.size_cap or 0
    informed_set = {start}
    cur = [start]
    spreaders = 1
    informed = 1
    rounds = 0
    truncated = False
    k = 0
    p = params.alpha
    while cur:
        k += 1
        if k > params.max_rounds:
            truncated = True
            break
        if decay:
            p = params.alpha ** float(k)
        nxt: list[int] = []
        capped = False
        for u in cur:
            for e in range(offsets[u], offsets[u + 1]):
                v = int(nbrs[e])
                if v not in informed_set:
                    informed_set.add(v)
                    informed += 1
                    rounds = k
                    if rng.random() < p:
                        spreaders += 1
                        nxt.append(v)
                        if cap and spreaders >= cap:
                            capped = True
                            break
            if capped:
                break
        if capped:
            truncated = True
            break
        cur = nxt
    return CascadeOutcome(spreaders, informed, rounds, truncated)


def simulate_alpha(g: Graph, params: ModelParams, start: int, rng: RngStream) -> CascadeOutcome:
    """Model alpha: one spreading decision per informed node, constant alpha."""
    return _simulate_alpha_family(g, params, start, rng, decay=False)


def simulate_alpha_k(g: Graph, params: ModelParams, start: int, rng: RngStream) -> CascadeOutcome:
    """Model alpha^k: spreading probability decays with the informing round."""
    return _simulate_alpha_family(g, params, start, rng, decay=True)


def simulate_multi_source_exact(
    g: Graph, params: ModelParams, lam: float, start: int, rng: RngStream
) -> CascadeOutcome:
    """Multi-source alpha^k on the graph with a shared informed set.

    In every round whose spreading phase informed at least one new node,
    Poisson(lambda) uniformly random sources are injected: an
    already-informed pick is a no-op, a fresh pick becomes a spreader whose
    neighbors restart the decay exponent at alpha^1.
    """
    _check_start(g, start)
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    offsets, nbrs = g.offsets, g.neighbors_array
    n = g.num_nodes
    cap = params.size_cap or 0
    informed_set = {start}
    cur: list[tuple[int, int]] = [(start, 0)]
    spreaders = 1
    informed = 1
    rounds = 0
    truncated = False
    t = 0
    while cur:
        t += 1
        if t > params.max_rounds:
            truncated = True
            break
        nxt: list[tuple[int, int]] = []
        new_informed = False
        capped = False
        for u, d in cur:
            for e in range(offsets[u], offsets[u + 1]):
                v = int(nbrs[e])
                if v not in informed_set:
                    informed_set.add(v)
                    informed += 1
                    new_informed = True
                    rounds = t
                    if rng.random() < params.alpha ** float(d + 1):
                        spreaders += 1
                        nxt.append((v, d + 1))
                        if cap and spreaders >= cap:
                            capped = True
                            break
            if capped:
                break
        if capped:
            truncated = True
            break
        if new_informed:
            x = rng.poisson(lam)
            for _ in range(x):
                v = rng.randbelow(n)
                if v not in informed_set:
                    informed_set.add(v)
                    informed += 1
                    spreaders += 1
                    nxt.append((v, 0))
                    if cap and spreaders >= cap:
                        capped = True
                        break
            if capped:
                truncated = True
                break
        cur = nxt
    return CascadeOutcome(spreaders, informed, rounds, truncated)


def run_batch(
    g: Graph,
    model: str,
    params: ModelParams,
    num_runs: int,
    seed: int,
    lambda_: float = 0.0,
    workers: int = 1,
    start: int | None = None,
) -> tuple[SizeHistogram, PropertyTable]:
    """Run ``num_runs`` cascades; run i draws its start node (uniform unless
    ``start`` overrides it) and its randomness from stream (seed, i).

    Returns the size histogram and the joint (size, rounds) property table.
    Results are byte-identical for any ``workers`` value.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    if num_runs < 1:
        raise ValueError("num_runs must be >= 1")
    if g.num_nodes == 0:
        raise ValueError("cannot simulate on an empty graph")
    if start is not None:
        _check_start(g, start)
    if lambda_ < 0:
        raise ValueError("lambda must be >= 0")

    size_cap = params.size_cap
    if size_cap is None and model == "alpha":
        size_cap = DEFAULT_ALPHA_BATCH_SIZE_CAP
    cap_arg = size_cap if size_cap is not None else 0

    out_spread = np.empty(num_runs, dtype=np.int32)
    out_informed = np.empty(num_runs, dtype=np.int32)
    out_rounds = np.empty(num_runs, dtype=np.int32)
    out_trunc = np.empty(num_runs, dtype=np.uint8)

    offsets, nbrs = g.offsets, g.neighbors_array
    num_nodes = g.num_nodes
    start_override = -1 if start is None else int(start)
    seed64 = np.uint64(seed & (2**64 - 1))
    alpha = float(params.alpha)
    max_rounds = int(params.max_rounds)

    if model in ("alpha", "alpha_k"):
        decay = model == "alpha_k"

        def worker(lo: int, hi: int) -> None:
            _kernels.alpha_family_batch(
                offsets, nbrs, num_nodes, alpha, decay, cap_arg, max_rounds,
                seed64, lo, hi, start_override,
                out_spread, out_informed, out_rounds, out_trunc,
            )

    elif model == "cgm":

        def worker(lo: int, hi: int) -> None:
            _kernels.cgm_batch(
                offsets, nbrs, num_nodes, alpha, cap_arg, max_rounds,
                seed64, lo, hi, start_override,
                out_spread, out_informed, out_rounds, out_trunc,
            )

    else:  # multi_exact

        def worker(lo: int, hi: int) -> None:
            _kernels.multi_exact_batch(
                offsets, nbrs, num_nodes, alpha, float(lambda_), cap_arg, max_rounds,
                seed64, lo, hi, start_override,
                out_spread, out_informed, out_rounds, out_trunc,
            )

    run_chunks(worker, num_runs, workers)

    truncated = int(out_trunc.sum())
    hist = histogram_from_sizes(out_spread, runs=num_runs, truncated=truncated)
    table = _property_table_from_outcomes(out_spread, out_rounds)
    return hist, table


def _property_table_from_outcomes(sizes: np.ndarray, rounds: np.ndarray) -> PropertyTable:
    key = sizes.astype(np.int64) * np.int64(2**32) + rounds.astype(np.int64)
    uniq, counts = np.unique(key, return_counts=True)
    entries = np.column_stack([uniq >> 32, uniq & (2**32 - 1), counts])
    return build_sampler(entries)
