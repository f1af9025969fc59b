"""Immutable directed graph storage with offset-compressed adjacency.

The graph is stored as two flat arrays (per-node offsets into a neighbor
array), the layout every simulator in this package walks sequentially.
Graphs are immutable after build and safe to share across threads; the
builder path deduplicates edges, drops self-loops and can densify sparse
node ids.

``direction_mode`` records how the stored adjacency relates to the input
edge list: ``forward`` keeps edges as given, ``reverse`` stores each edge
flipped, ``undirected`` stores both directions.  Simulators always follow
the stored adjacency; whether that means "along retweets" or "along
influence" is decided by whoever built the edge list.
"""

from __future__ import annotations

import math
import os
import struct
import tempfile
from typing import Iterable, Sequence

import numpy as np

MAGIC = b"CSCG"
FORMAT_VERSION = 1

DIRECTION_MODES = ("forward", "reverse", "undirected")

_FLAG_WIDE = 0x1
_MODE_SHIFT = 1
_MODE_MASK = 0x3

_INT32_MAX = np.iinfo(np.int32).max


class GraphFormatError(ValueError):
    """Raised for malformed graph files; ``offset`` is the failing byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class Graph:
    """Directed graph over dense integer node ids 0..num_nodes-1.

    Adjacency is offset-compressed: node v's out-neighbors are
    ``neighbors_array[offsets[v]:offsets[v+1]]``, sorted ascending with no
    duplicates and no self-loops.
    """

    __slots__ = ("_offsets", "_neighbors", "direction_mode")

    def __init__(self, offsets: np.ndarray, neighbors: np.ndarray, direction_mode: str):
        if direction_mode not in DIRECTION_MODES:
            raise ValueError(f"unknown direction_mode {direction_mode!r}")
        self._offsets = offsets
        self._neighbors = neighbors
        self.direction_mode = direction_mode

    @property
    def num_nodes(self) -> int:
        return len(self._offsets) - 1

    @property
    def num_edges(self) -> int:
        return len(self._neighbors)

    @property
    def offsets(self) -> np.ndarray:
        return self._offsets

    @property
    def neighbors_array(self) -> np.ndarray:
        return self._neighbors

    def neighbors(self, v: int) -> np.ndarray:
        """Out-neighbors of v as a zero-copy array view, ascending order."""
        if v < 0 or v >= self.num_nodes:
            raise IndexError(f"node {v} out of range for graph with {self.num_nodes} nodes")
        return self._neighbors[self._offsets[v] : self._offsets[v + 1]]

    def degree(self, v: int) -> int:
        if v < 0 or v >= self.num_nodes:
            raise IndexError(f"node {v} out of range for graph with {self.num_nodes} nodes")
        return int(self._offsets[v + 1] - self._offsets[v])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.direction_mode == other.direction_mode
            and self.num_nodes == other.num_nodes
            and np.array_equal(self._offsets, other._offsets)
            and np.array_equal(self._neighbors, other._neighbors)
        )

    def __repr__(self) -> str:
        return (
            f"Graph(num_nodes={self.num_nodes}, num_edges={self.num_edges}, "
            f"direction_mode={self.direction_mode!r})"
        )

    # ---- persistence -----------------------------------------------------

    def save(self, path: str | os.PathLike) -> None:
        """Write the binary graph format (atomic: temp file + rename)."""
        wide = self.num_nodes > _INT32_MAX
        flags = (_FLAG_WIDE if wide else 0) | (
            DIRECTION_MODES.index(self.direction_mode) << _MODE_SHIFT
        )
        header = struct.pack(
            "<4sIIQQ", MAGIC, FORMAT_VERSION, flags, self.num_nodes, self.num_edges
        )
        nbr_dtype = "<u8" if wide else "<u4"
        directory = os.path.dirname(os.path.abspath(path)) or "."
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".cscg-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(header)
                fh.write(self._offsets.astype("<u8", copy=False).tobytes())
                fh.write(self._neighbors.astype(nbr_dtype).tobytes())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Graph":
        """Read a graph file back; malformed content raises GraphFormatError."""
        with open(path, "rb") as fh:
            data = fh.read()
        header_size = struct.calcsize("<4sIIQQ")
        if len(data) < header_size:
            raise GraphFormatError("truncated header", len(data))
        magic, version, flags, num_nodes, num_edges = struct.unpack(
            "<4sIIQQ", data[:header_size]
        )
        if magic != MAGIC:
            raise GraphFormatError(f"bad magic {magic!r}", 0)
        if version != FORMAT_VERSION:
            raise GraphFormatError(f"unsupported format version {version}", 4)
        mode_code = (flags >> _MODE_SHIFT) & _MODE_MASK
        if mode_code >= len(DIRECTION_MODES):
            raise GraphFormatError(f"bad direction mode code {mode_code}", 8)
        wide = bool(flags & _FLAG_WIDE)
        nbr_itemsize = 8 if wide else 4
        offsets_end = header_size + 8 * (num_nodes + 1)
        neighbors_end = offsets_end + nbr_itemsize * num_edges
        if len(data) < offsets_end:
            raise GraphFormatError("truncated offsets array", len(data))
        if len(data) != neighbors_end:
            raise GraphFormatError("truncated or oversized neighbors array", len(data))
        offsets = np.frombuffer(data, dtype="<u8", count=num_nodes + 1, offset=header_size)
        neighbors = np.frombuffer(
            data, dtype="<u8" if wide else "<u4", count=num_edges, offset=offsets_end
        )
        if num_nodes + 1 > 0:
            if offsets[0] != 0 or offsets[-1] != num_edges:
                raise GraphFormatError("offsets do not span the neighbor array", header_size)
            if np.any(np.diff(offsets.astype(np.int64)) < 0):
                raise GraphFormatError("offsets not nondecreasing", header_size)
        if num_edges and neighbors.max() >= num_nodes:
            raise GraphFormatError("neighbor index out of range", offsets_end)
        out_dtype = np.int64 if wide else np.int32
        return cls(
            offsets.astype(np.int64),
            neighbors.astype(out_dtype),
            DIRECTION_MODES[mode_code],
        )


def _csr_from_sorted(src: np.ndarray, dst: np.ndarray, num_nodes: int, mode: str) -> Graph:
    # src must be sorted, (src, dst) unique, both in [0, num_nodes)
    counts = np.bincount(src, minlength=num_nodes) if num_nodes else np.zeros(0, np.int64)
    offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    nbr_dtype = np.int32 if num_nodes <= _INT32_MAX else np.int64
    return Graph(offsets, dst.astype(nbr_dtype), mode)


def build(
    edges: Sequence[tuple[int, int]] | np.ndarray,
    direction_mode: str = "forward",
    *,
    num_nodes: int | None = None,
    return_mapping: bool = False,
):
    """Build a Graph from an edge list.

    Without ``num_nodes``, node ids are densified: the sorted distinct ids
    become dense ids 0..k-1 and the mapping (dense -> original id) is
    returned when ``return_mapping`` is set.  With ``num_nodes``, ids must
    already be dense in [0, num_nodes).

    Self-loops are dropped and duplicate (src, dst) pairs collapse to one
    edge.  ``undirected`` stores each input edge both ways; ``reverse``
    stores each input edge flipped.
    """
    if direction_mode not in DIRECTION_MODES:
        raise ValueError(f"unknown direction_mode {direction_mode!r}")
    arr = np.asarray(edges, dtype=np.int64)
    if arr.size == 0:
        arr = arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("edges must be a sequence of (src, dst) pairs")

    if num_nodes is None:
        mapping = np.unique(arr)  # sorted distinct ids -> dense order
        n = len(mapping)
        if arr.size:
            src = np.searchsorted(mapping, arr[:, 0])
            dst = np.searchsorted(mapping, arr[:, 1])
        else:
            src = dst = np.zeros(0, dtype=np.int64)
    else:
        n = int(num_nodes)
        if n < 0:
            raise ValueError("num_nodes must be >= 0")
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise ValueError("edge endpoint outside [0, num_nodes)")
        mapping = np.arange(n, dtype=np.int64)
        src, dst = arr[:, 0].copy(), arr[:, 1].copy()

    if direction_mode == "reverse":
        src, dst = dst, src
    elif direction_mode == "undirected":
        src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])

    keep = src != dst
    src, dst = src[keep], dst[keep]
    if len(src):
        # n < 2**31 always holds here, so src * n + dst fits in int64
        key = np.unique(src * np.int64(n) + dst)
        src = key // n
        dst = key % n
    g = _csr_from_sorted(src, dst, n, direction_mode)
    if return_mapping:
        return g, mapping
    return g


class GraphBuilder:
    """Accumulates edges, then builds an immutable Graph (single-threaded)."""

    def __init__(self, num_nodes: int | None = None):
        self._num_nodes = num_nodes
        self._src: list[int] = []
        self._dst: list[int] = []

    def add_edge(self, src: int, dst: int) -> None:
        self._src.append(src)
        self._dst.append(dst)

    def add_edges(self, edges: Iterable[tuple[int, int]]) -> None:
        for s, d in edges:
            self._src.append(s)
            self._dst.append(d)

    def __len__(self) -> int:
        return len(self._src)

    def build(self, direction_mode: str = "forward", *, return_mapping: bool = False):
        arr = np.column_stack(
            [
                np.asarray(self._src, dtype=np.int64),
                np.asarray(self._dst, dtype=np.int64),
            ]
        ) if self._src else np.zeros((0, 2), dtype=np.int64)
        return build(
            arr,
            direction_mode,
            num_nodes=self._num_nodes,
            return_mapping=return_mapping,
        )


# ---- synthetic generators (test and experiment substrates) ----------------


def generate_star(leaves: int) -> Graph:
    """Node 0 is the center; forward edges center -> leaf."""
    if leaves < 0:
        raise ValueError("leaves must be >= 0")
    edges = [(0, i) for i in range(1, leaves + 1)]
    return build(edges, "forward", num_nodes=leaves + 1)


def generate_path(n: int) -> Graph:
    """Forward chain 0 -> 1 -> ... -> n-1."""
    if n < 1:
        raise ValueError("path needs at least one node")
    edges = [(i, i + 1) for i in range(n - 1)]
    return build(edges, "forward", num_nodes=n)


def generate_erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """G(n, p) over ordered node pairs: each directed non-loop edge is
    present independently with probability p.  Deterministic given seed.

    Uses geometric gap skipping, so runtime scales with the number of
    edges rather than n^2.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    if n < 0:
        raise ValueError("n must be >= 0")
    total = n * (n - 1)
    if n == 0 or p == 0.0 or total == 0:
        return build([], "forward", num_nodes=n)
    if p == 1.0:
        src = np.repeat(np.arange(n, dtype=np.int64), n - 1)
        r = np.tile(np.arange(n - 1, dtype=np.int64), n)
        dst = np.where(r < src, r, r + 1)
        return _csr_from_sorted(src, dst, n, "forward")

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    logq = math.log1p(-p)
    expected = total * p
    chunk = int(min(max(1024.0, expected + 6.0 * math.sqrt(expected) + 16.0), 2e7))
    positions: list[np.ndarray] = []
    last = -1
    while True:
        u = rng.random(chunk)
        gaps = np.floor(np.log1p(-u) / logq).astype(np.int64) + 1
        cum = last + np.cumsum(gaps)
        inside = cum < total
        positions.append(cum[inside])
        if not inside.all():
            break
        last = int(cum[-1])
    lin = np.concatenate(positions)
    src = lin // (n - 1)
    r = lin % (n - 1)
    dst = np.where(r < src, r, r + 1)
    return _csr_from_sorted(src, dst, n, "forward")


# ---- text edge list --------------------------------------------------------


def read_edge_list(path: str | os.PathLike) -> np.ndarray:
    """Read "src<TAB>dst" decimal pairs, one per line; returns an (m, 2) array."""
    src: list[int] = []
    dst: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'src<TAB>dst'")
            src.append(int(parts[0]))
            dst.append(int(parts[1]))
    if not src:
        return np.zeros((0, 2), dtype=np.int64)
    return np.column_stack([np.asarray(src, np.int64), np.asarray(dst, np.int64)])


def write_edge_list(g: Graph, path: str | os.PathLike) -> None:
    """Write the stored adjacency as "src<TAB>dst" lines."""
    with open(path, "w", encoding="utf-8") as fh:
        offsets = g.offsets
        nbrs = g.neighbors_array
        for v in range(g.num_nodes):
            for e in range(offsets[v], offsets[v + 1]):
                fh.write(f"{v}\t{int(nbrs[e])}\n")
