"""Interaction-event ingestion.

Turns a log of (timestamp, actor, targets, hashtags) events into the
inputs of the simulation pipeline:

* the retweet-graph edge list (influence direction: an event where actor A
  retweets/replies/mentions B yields edge B -> A, since information flowed
  from B to A), plus the external-id -> dense-id mapping;
* the fresh-hashtag popularity distribution (hashtags already seen during
  an initial window are dropped; popularity is the number of distinct
  actors that used the tag after the window) -- the empirical cascade-size
  distribution the models are compared against;
* a train/test split of the available consecutive full UTC days.

Parsing is streamable; edge and popularity aggregation only need
per-shard maps that merge, so outputs are independent of how the input is
chunked.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Iterator

import numpy as np

from .stats import SizeHistogram, _atomic_write

SECONDS_PER_DAY = 86_400


class ParseError(ValueError):
    """Malformed event line in strict mode; carries the 1-based line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass
class EventRecord:
    timestamp: int
    actor: str
    targets: frozenset[str]
    hashtags: frozenset[str]


@dataclass
class ParseStats:
    lines: int = 0
    records: int = 0
    malformed: int = 0


def _parse_line(line: str) -> EventRecord | None:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 4:
        return None
    ts_field, actor, targets_field, hashtags_field = parts
    try:
        ts = int(ts_field)
    except ValueError:
        return None
    if ts < 0 or not actor:
        return None
    targets = frozenset(t for t in targets_field.split(",") if t)
    # hashtags compare case-insensitively; fold once at parse time
    hashtags = frozenset(h.casefold() for h in hashtags_field.split(",") if h)
    return EventRecord(ts, actor, targets, hashtags)


def parse_events(
    lines: Iterable[str],
    strict: bool = False,
    stats: ParseStats | None = None,
) -> Iterator[EventRecord]:
    """Parse TSV event lines: timestamp, actor, comma-separated targets,
    comma-separated hashtags (either list may be empty).

    Malformed lines are counted in ``stats`` and skipped; in strict mode
    they raise ParseError with the line number instead.  Events need not
    be time-sorted.
    """
    for lineno, line in enumerate(lines, 1):
        if stats is not None:
            stats.lines += 1
        if not line.strip():
            continue
        record = _parse_line(line)
        if record is None:
            if strict:
                raise ParseError(f"malformed event: {line.strip()!r}", lineno)
            if stats is not None:
                stats.malformed += 1
            continue
        if stats is not None:
            stats.records += 1
        yield record


def load_events(path: str | os.PathLike, strict: bool = False,
                stats: ParseStats | None = None) -> list[EventRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        return list(parse_events(fh, strict=strict, stats=stats))


# ---- retweet graph ----------------------------------------------------------


def build_retweet_edges(
    events: Iterable[EventRecord],
) -> tuple[np.ndarray, list[str]]:
    """Influence edges (target -> actor, deduplicated) over dense node ids.

    Nodes are all user ids that occur in any event (as actor or target),
    mapped to dense ids in sorted external-id order, so the result is
    invariant under event reordering and duplication.  Returns the (m, 2)
    dense edge array and the dense-id -> external-id mapping.
    """
    users: set[str] = set()
    raw_edges: set[tuple[str, str]] = set()
    for ev in events:
        users.add(ev.actor)
        for target in ev.targets:
            users.add(target)
            if target != ev.actor:
                raw_edges.add((target, ev.actor))  # influence flows B -> A
    mapping = sorted(users)
    index = {u: i for i, u in enumerate(mapping)}
    if raw_edges:
        edges = np.array(
            sorted((index[s], index[d]) for s, d in raw_edges), dtype=np.int64
        )
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
    return edges, mapping


# ---- fresh-hashtag popularity ----------------------------------------------


@dataclass
class PopularityDistribution:
    """hashtag popularity (distinct users) -> number of hashtags with it."""

    counts: dict[int, int] = field(default_factory=dict)

    @property
    def total_hashtags(self) -> int:
        return sum(self.counts.values())

    def to_histogram(self) -> SizeHistogram:
        """View as a cascade-size histogram (the K-S comparison target)."""
        return SizeHistogram(dict(self.counts))


def fresh_window(events: Iterable[EventRecord], days: int = 1) -> tuple[int, int]:
    """Default exclusion window: the first ``days`` calendar days touched
    by the data, i.e. [min_ts, utc_day_start(min_ts) + days)."""
    if days < 0:
        raise ValueError("days must be >= 0")
    timestamps = [ev.timestamp for ev in events]
    if not timestamps:
        raise ValueError("no events")
    lo = min(timestamps)
    day_start = (lo // SECONDS_PER_DAY) * SECONDS_PER_DAY
    return lo, day_start + days * SECONDS_PER_DAY


def compute_popularity(
    events: Iterable[EventRecord], window: tuple[int, int]
) -> PopularityDistribution:
    """Popularity distribution of hashtags absent during ``window``.

    A hashtag with any occurrence inside [window_lo, window_hi) is
    excluded; for the rest, popularity is the number of distinct actors
    using it at or after window_hi.
    """
    lo, hi = window
    if lo > hi:
        raise ValueError("window must satisfy lo <= hi")
    stale: set[str] = set()
    users_by_tag: dict[str, set[str]] = {}
    for ev in events:
        if lo <= ev.timestamp < hi:
            stale.update(ev.hashtags)
        elif ev.timestamp >= hi:
            for tag in ev.hashtags:
                users_by_tag.setdefault(tag, set()).add(ev.actor)
    counts: dict[int, int] = {}
    for tag, users in users_by_tag.items():
        if tag in stale:
            continue
        pop = len(users)
        counts[pop] = counts.get(pop, 0) + 1
    return PopularityDistribution(counts)


# ---- train/test day split ---------------------------------------------------


@dataclass
class DaySplit:
    """Consecutive full UTC days, first half train (odd day out to train)."""

    train: tuple[str, ...]
    test: tuple[str, ...]


def _day_to_date(day_index: int) -> str:
    return datetime.fromtimestamp(day_index * SECONDS_PER_DAY, tz=timezone.utc).date().isoformat()


def full_day_range(events: Iterable[EventRecord]) -> tuple[int, int]:
    """[first, last+1) UTC day indices fully covered by the event range."""
    timestamps = [ev.timestamp for ev in events]
    if not timestamps:
        raise ValueError("no events")
    lo, hi = min(timestamps), max(timestamps)
    first_full = -(-lo // SECONDS_PER_DAY)  # ceil
    end_limit = (hi + 1) // SECONDS_PER_DAY
    return first_full, end_limit


def split_days(events: Iterable[EventRecord]) -> DaySplit:
    """Halve the available consecutive full days: first half train, second
    half test; with an odd count the extra day goes to train."""
    events = list(events)
    first_full, end_limit = full_day_range(events)
    n_days = end_limit - first_full
    if n_days < 2:
        raise ValueError(
            f"need at least 2 full UTC days, found {max(n_days, 0)}"
        )
    n_train = (n_days + 1) // 2
    days = [_day_to_date(d) for d in range(first_full, end_limit)]
    return DaySplit(tuple(days[:n_train]), tuple(days[n_train:]))


def filter_events_by_days(
    events: Iterable[EventRecord], days: Iterable[str]
) -> list[EventRecord]:
    """Events whose UTC calendar day is in ``days`` (ISO dates)."""
    wanted = set(days)
    out = []
    for ev in events:
        if _day_to_date(ev.timestamp // SECONDS_PER_DAY) in wanted:
            out.append(ev)
    return out


# ---- TSV writers ------------------------------------------------------------


def write_popularity(dist: PopularityDistribution, path: str | os.PathLike) -> None:
    """``popularity<TAB>hashtag_count`` rows, ascending popularity."""
    lines = [f"{p}\t{c}" for p, c in sorted(dist.counts.items())]
    _atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))


def write_id_map(mapping: list[str], path: str | os.PathLike) -> None:
    """``external_id<TAB>dense_id`` rows."""
    lines = [f"{ext}\t{dense}" for dense, ext in enumerate(mapping)]
    _atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))


def write_day_split(split: DaySplit, path: str | os.PathLike) -> None:
    """``date<TAB>train|test`` rows in calendar order."""
    lines = [f"{d}\ttrain" for d in split.train] + [f"{d}\ttest" for d in split.test]
    _atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))
