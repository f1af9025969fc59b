"""Compound-Poisson fast path for multi-source cascades.

A batch of single-source cascades is summarized as a table of
(size, rounds) pairs with frequencies.  Sampling the table is worst-case
O(1) via an alias table built in exact integer arithmetic, so the marginal
probability of each entry equals frequency/total exactly.  A multi-source
rumor is then composed from table draws: starting from one cascade, every
live round injects Poisson(lambda) additional cascades, each extending the
live horizon by its own round count.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from ._parallel import run_chunks
from .rng import RngStream, derive_seed
from .stats import SizeHistogram, _atomic_write, histogram_from_sizes

# a rumor whose live horizon outgrows this is reported as divergent
DEFAULT_ROUND_CAP = 1_000_000


class DivergenceError(RuntimeError):
    """The rumor's round horizon exceeded the configured cap.

    Signals a rate too large for the table's rounds distribution: the
    injection process is supercritical and the recurrence would not stop.
    """


@dataclass
class RumorOutcome:
    size: int
    rounds: int


class PropertyTable:
    """Empirical joint distribution of (cascade size, rounds) with O(1) sampling.

    Immutable and shareable once built.  Entries are kept sorted by
    (size, rounds); duplicate pairs are merged at build time.
    """

    __slots__ = ("sizes", "rounds", "freqs", "total", "_thresh", "_alias")

    def __init__(self, sizes: np.ndarray, rounds: np.ndarray, freqs: np.ndarray):
        if len(sizes) == 0:
            raise ValueError("property table must have at least one entry")
        if np.any(freqs <= 0):
            raise ValueError("entry frequencies must be positive")
        if np.any(sizes < 1) or np.any(rounds < 0):
            raise ValueError("entries need size >= 1 and rounds >= 0")
        self.sizes = sizes
        self.rounds = rounds
        self.freqs = freqs
        self.total = int(freqs.sum())
        self._thresh, self._alias = _build_alias(freqs)

    @property
    def num_entries(self) -> int:
        return len(self.sizes)

    def entries(self) -> Iterable[tuple[int, int, int]]:
        for s, r, f in zip(self.sizes, self.rounds, self.freqs):
            yield int(s), int(r), int(f)

    def sample(self, rng: RngStream) -> tuple[int, int]:
        """Draw one (size, rounds) pair; consumes two bounded-integer draws."""
        j = rng.randbelow(self.num_entries)
        u = rng.randbelow(self.total)
        if u >= self._thresh[j]:
            j = int(self._alias[j])
        return int(self.sizes[j]), int(self.rounds[j])

    def size_marginal(self) -> SizeHistogram:
        counts: dict[int, int] = {}
        for s, f in zip(self.sizes, self.freqs):
            counts[int(s)] = counts.get(int(s), 0) + int(f)
        return SizeHistogram(counts, runs=self.total)

    def save(self, path: str | os.PathLike) -> None:
        lines = [f"{s}\t{r}\t{f}" for s, r, f in self.entries()]
        _atomic_write(path, "\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "PropertyTable":
        entries: list[tuple[int, int, int]] = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ValueError(f"{path}:{lineno}: expected 'size<TAB>rounds<TAB>count'")
                entries.append((int(parts[0]), int(parts[1]), int(parts[2])))
        if not entries:
            raise ValueError(f"{path}: empty property table")
        return build_sampler(entries)


def build_sampler(entries: Sequence[tuple[int, int, int]]) -> PropertyTable:
    """Build a PropertyTable from (size, rounds, frequency) triples.

    Linear-time preprocessing; afterwards each draw costs two bounded
    integer draws regardless of table size.
    """
    if len(entries) == 0:
        raise ValueError("property table must have at least one entry")
    arr = np.asarray(entries, dtype=np.int64)
    order = np.lexsort((arr[:, 1], arr[:, 0]))
    arr = arr[order]
    # merge duplicate (size, rounds) pairs
    key_change = np.ones(len(arr), dtype=bool)
    key_change[1:] = (arr[1:, 0] != arr[:-1, 0]) | (arr[1:, 1] != arr[:-1, 1])
    group = np.cumsum(key_change) - 1
    sizes = arr[key_change, 0]
    rounds = arr[key_change, 1]
    freqs = np.bincount(group, weights=arr[:, 2]).astype(np.int64)
    return PropertyTable(sizes, rounds, freqs)


def _build_alias(freqs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact-integer alias construction.

    Each of the n buckets holds ``total`` units; bucket j keeps thresh[j]
    units of entry j and donates the rest to alias[j].  All bookkeeping is
    integer, so entry j's sampling probability is exactly freq[j]/total.
    """
    n = len(freqs)
    total = int(freqs.sum())
    if total * n > 2**62:
        raise ValueError("table too large for exact alias arithmetic")
    scaled = freqs.astype(np.int64) * n
    thresh = np.empty(n, dtype=np.int64)
    alias = np.arange(n, dtype=np.int64)
    small: list[int] = []
    large: list[int] = []
    for i in range(n):
        if scaled[i] < total:
            small.append(i)
        elif scaled[i] > total:
            large.append(i)
        else:
            thresh[i] = total
    while small and large:
        l = small.pop()
        g = large.pop()
        thresh[l] = scaled[l]
        alias[l] = g
        scaled[g] -= total - scaled[l]
        if scaled[g] < total:
            small.append(g)
        elif scaled[g] > total:
            large.append(g)
        else:
            thresh[g] = total
    for i in small:  # exact-integer leftovers always hold precisely `total`
        thresh[i] = total
    for i in large:
        thresh[i] = total
    return thresh, alias


def sample_poisson(lam: float, rng: RngStream) -> int:
    """Poisson(lam) draw with an exact marginal (see RngStream.poisson)."""
    return rng.poisson(lam)


def multi_source_alpha_exp(
    table: PropertyTable,
    lam: float,
    rng: RngStream,
    round_cap: int = DEFAULT_ROUND_CAP,
) -> RumorOutcome:
    """Compose one multi-source rumor from table draws.

    Draw an initial (size, rounds); then for every live round inject
    Poisson(lam) sub-cascades, adding their sizes and extending the live
    horizon via max(rounds, current_round + r).  Raises DivergenceError if
    the horizon exceeds ``round_cap``.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    size, rounds = table.sample(rng)
    curr = 1
    while curr <= rounds:
        x = rng.poisson(lam)
        for _ in range(x):
            s, r = table.sample(rng)
            size += s
            if curr + r > rounds:
                rounds = curr + r
        if rounds > round_cap:
            raise DivergenceError(
                f"round horizon {rounds} exceeded cap {round_cap}; "
                f"lambda={lam} is too large for this table"
            )
        curr += 1
    return RumorOutcome(size, rounds)


def reference_multi_source(
    table: PropertyTable,
    lam: float,
    rng: RngStream,
    round_cap: int = DEFAULT_ROUND_CAP,
) -> RumorOutcome:
    """Deliberately naive interpreter of the multi-source recurrence.

    Keeps an explicit queue of pending round numbers and appends newly
    reachable rounds as the horizon grows.  Semantic reference for
    multi_source_alpha_exp: given the same stream it must match it
    draw-for-draw.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    size, rounds = table.sample(rng)
    pending = list(range(1, rounds + 1))
    qi = 0
    while qi < len(pending):
        curr = pending[qi]
        qi += 1
        x = rng.poisson(lam)
        for _ in range(x):
            s, r = table.sample(rng)
            size += s
            if curr + r > rounds:
                pending.extend(range(rounds + 1, curr + r + 1))
                rounds = curr + r
        if rounds > round_cap:
            raise DivergenceError(
                f"round horizon {rounds} exceeded cap {round_cap}; "
                f"lambda={lam} is too large for this table"
            )
    return RumorOutcome(size, rounds)


def run_compound_batch(
    table: PropertyTable,
    lam: float,
    num_runs: int,
    seed: int,
    workers: int = 1,
    round_cap: int = DEFAULT_ROUND_CAP,
) -> SizeHistogram:
    """Batch of multi-source rumors; run i uses stream (seed, i).

    Divergent runs are excluded from the histogram and counted in its
    ``diverged`` metadata.  Output is independent of worker count.
    """
    if num_runs < 1:
        raise ValueError("num_runs must be >= 1")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    out_size = np.empty(num_runs, dtype=np.int64)
    out_rounds = np.empty(num_runs, dtype=np.int64)
    out_div = np.empty(num_runs, dtype=np.uint8)
    sizes = table.sizes
    rounds_arr = table.rounds
    thresh = table._thresh
    alias = table._alias
    total = table.total
    seed64 = np.uint64(seed & (2**64 - 1))

    def worker(lo: int, hi: int) -> None:
        _kernels.compound_batch(
            sizes,
            rounds_arr,
            thresh,
            alias,
            total,
            float(lam),
            round_cap,
            seed64,
            lo,
            hi,
            out_size,
            out_rounds,
            out_div,
        )

    run_chunks(worker, num_runs, workers)
    ok = out_div == 0
    diverged = int(num_runs - ok.sum())
    if diverged == num_runs:
        raise DivergenceError(
            f"all {num_runs} runs diverged at lambda={lam}; no histogram produced"
        )
    return histogram_from_sizes(out_size[ok], runs=num_runs, diverged=diverged)


def batch_seed(seed: int, *context: int) -> int:
    """Stable derivation of a sub-seed for a named batch within a workflow."""
    return derive_seed(seed, *context)
