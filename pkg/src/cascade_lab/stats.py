"""Cascade-size histograms, empirical CDFs and the Kolmogorov-Smirnov statistic.

The K-S comparison is done in exact integer arithmetic (cross-multiplied
cumulative counts), so grid searches that compare statistics differing by
~1e-3 are bit-reproducible; floats appear only at the reporting boundary.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np


def _atomic_write(path: str | os.PathLike, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tsv-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class SizeHistogram:
    """Counts of cascade sizes plus batch metadata.

    ``runs`` is the number of simulations behind the histogram (defaults
    to the count total); ``truncated`` counts runs cut off at a size cap or
    round cap (still included in the counts, recorded at the cap);
    ``diverged`` counts runs excluded from the counts entirely.
    """

    counts: dict[int, int] = field(default_factory=dict)
    runs: int = -1
    truncated: int = 0
    diverged: int = 0

    def __post_init__(self):
        for size, count in self.counts.items():
            if size < 1 or count < 1:
                raise ValueError(f"invalid histogram entry {size}:{count}")
        if self.runs < 0:
            self.runs = self.total

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def items(self) -> Iterator[tuple[int, int]]:
        return iter(sorted(self.counts.items()))

    def mean(self) -> float:
        total = self.total
        if total == 0:
            raise ValueError("empty histogram has no mean")
        return sum(s * c for s, c in self.counts.items()) / total

    def max_size(self) -> int:
        if not self.counts:
            raise ValueError("empty histogram has no max size")
        return max(self.counts)


def merge(a: SizeHistogram, b: SizeHistogram) -> SizeHistogram:
    """Pointwise count addition; associative and commutative."""
    counts = dict(a.counts)
    for size, count in b.counts.items():
        counts[size] = counts.get(size, 0) + count
    return SizeHistogram(
        counts,
        runs=a.runs + b.runs,
        truncated=a.truncated + b.truncated,
        diverged=a.diverged + b.diverged,
    )


def histogram_from_sizes(sizes: np.ndarray, runs: int, truncated: int = 0,
                         diverged: int = 0) -> SizeHistogram:
    values, counts = np.unique(sizes, return_counts=True)
    return SizeHistogram(
        {int(v): int(c) for v, c in zip(values, counts)},
        runs=runs,
        truncated=truncated,
        diverged=diverged,
    )


@dataclass
class Cdf:
    """Right-continuous step CDF over integer sizes, kept as exact counts."""

    support: np.ndarray  # sorted distinct sizes
    cum_counts: np.ndarray  # cumulative counts, same length
    total: int

    def value_at(self, x: int) -> float:
        """CDF evaluated at x (float view of the exact ratio)."""
        idx = int(np.searchsorted(self.support, x, side="right")) - 1
        if idx < 0:
            return 0.0
        return int(self.cum_counts[idx]) / self.total


def to_cdf(h: SizeHistogram) -> Cdf:
    if not h.counts:
        raise ValueError("cannot build a CDF from an empty histogram")
    items = sorted(h.counts.items())
    support = np.array([s for s, _ in items], dtype=np.int64)
    cum = np.cumsum([c for _, c in items], dtype=np.int64)
    return Cdf(support, cum, int(cum[-1]))


@dataclass
class KsResult:
    """The K-S statistic sup_x |A(x) - B(x)| and where it is achieved.

    ``numerator``/``denominator`` carry the exact rational value; the float
    ``statistic`` is for reporting.
    """

    statistic: float
    location: int
    numerator: int
    denominator: int


def ks_statistic(a: Cdf, b: Cdf) -> KsResult:
    """Supremum of |A(x) - B(x)| over the union of both supports.

    For right-continuous step functions the union of supports is
    sufficient.  Comparison uses cross-multiplied integer counts, so equal
    statistics compare equal exactly; ties on the value report the
    smallest achieving support point.
    """
    ta, tb = a.total, b.total
    best_num = 0
    best_loc = None
    ia = ib = 0
    ca = cb = 0
    na, nb = len(a.support), len(b.support)
    while ia < na or ib < nb:
        xa = int(a.support[ia]) if ia < na else None
        xb = int(b.support[ib]) if ib < nb else None
        if xb is None or (xa is not None and xa <= xb):
            x = xa
        else:
            x = xb
        if ia < na and int(a.support[ia]) == x:
            ca = int(a.cum_counts[ia])
            ia += 1
        if ib < nb and int(b.support[ib]) == x:
            cb = int(b.cum_counts[ib])
            ib += 1
        num = abs(ca * tb - cb * ta)
        if best_loc is None or num > best_num:
            best_num = num
            best_loc = x
    den = ta * tb
    g = math.gcd(best_num, den)
    return KsResult(best_num / den, best_loc, best_num // g, den // g)


@dataclass
class LogBucket:
    lo: int  # inclusive
    hi: int  # exclusive
    mass: float


def log_bucketize(h: SizeHistogram, base: float) -> list[LogBucket]:
    """Group sizes into buckets [ceil(base^k), ceil(base^(k+1))).

    Integer-ceiling boundaries place every integer size in exactly one
    bucket; empty buckets are emitted with mass 0 up to the histogram's
    max size, so masses always sum to 1.
    """
    if base <= 1.0:
        raise ValueError("base must be > 1")
    if not h.counts:
        return []
    total = h.total
    max_size = h.max_size()

    def boundary(k: int) -> int:
        v = base**k
        # guard pow landing a hair above an exact integer
        return math.ceil(v - abs(v) * 1e-12)

    buckets: list[LogBucket] = []
    k = 0
    while k < 1_000_000:
        lo = boundary(k)
        if lo > max_size:
            break
        hi = boundary(k + 1)
        if hi > lo:  # zero-width buckets (ceil collapse near base->1) are skipped
            count = sum(c for s, c in h.counts.items() if lo <= s < hi)
            buckets.append(LogBucket(lo, hi, count / total))
        k += 1
    else:
        raise ValueError(f"base {base} too close to 1 for this histogram")
    return buckets


# ---- TSV formats -----------------------------------------------------------


def format_histogram(h: SizeHistogram) -> str:
    lines = [f"# runs={h.runs} truncated={h.truncated} diverged={h.diverged}"]
    for size, count in h.items():
        lines.append(f"{size}\t{count}")
    return "\n".join(lines) + "\n"


def write_histogram(h: SizeHistogram, path: str | os.PathLike) -> None:
    _atomic_write(path, format_histogram(h))


def read_histogram(path: str | os.PathLike) -> SizeHistogram:
    counts: dict[int, int] = {}
    meta = {"runs": -1, "truncated": 0, "diverged": 0}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if "=" in token:
                        key, _, value = token.partition("=")
                        if key in meta:
                            meta[key] = int(value)
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'size<TAB>count'")
            counts[int(parts[0])] = int(parts[1])
    return SizeHistogram(counts, **meta)


def write_cdf(c: Cdf, path: str | os.PathLike) -> None:
    lines = [
        f"{int(s)}\t{int(cc) / c.total:.17g}"
        for s, cc in zip(c.support, c.cum_counts)
    ]
    _atomic_write(path, "\n".join(lines) + "\n")


def write_buckets(buckets: list[LogBucket], path: str | os.PathLike) -> None:
    lines = [f"{b.lo}\t{b.hi}\t{b.mass:.17g}" for b in buckets]
    _atomic_write(path, "\n".join(lines) + "\n")
