"""Directed trust graphs: ingestion, sub-sampling, k-core pruning and link counts.

Graphs are immutable.  Every structural operation returns a new graph whose
node ids are densely re-indexed to ``[0, n_nodes)``; the ``labels`` array maps
each dense id back to the id it had in the original input.
"""
from __future__ import annotations

import gzip
import hashlib
import io
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Union

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

SNAPSHOT_FORMAT = "sybilquorum-graph"
SNAPSHOT_VERSION = 1

NodeSet = Union[Iterable[int], np.ndarray]


class EdgeListError(ValueError):
    """Malformed edge-list input."""

    def __init__(self, lineno: int, line: str, reason: str = "non-integer token"):
        super().__init__(f"line {lineno}: {reason}: {line.strip()!r}")
        self.lineno = lineno


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    """Node set ``[0, n_nodes)`` plus directed arcs carrying non-negative stake.

    Arcs are stored sorted by ``(tail, head)``.  Use :meth:`from_arcs` to build
    one; the constructor assumes its inputs are already canonical.
    """

    n_nodes: int
    tails: np.ndarray
    heads: np.ndarray
    stakes: np.ndarray
    labels: np.ndarray

    @classmethod
    def from_arcs(cls, n_nodes, tails, heads, stakes=None, labels=None) -> "DirectedGraph":
        tails = np.asarray(tails, dtype=np.int64).ravel()
        heads = np.asarray(heads, dtype=np.int64).ravel()
        if tails.shape != heads.shape:
            raise ValueError("tails and heads differ in length")
        if stakes is None:
            stakes = np.ones(len(tails), dtype=np.int64)
        else:
            stakes = np.broadcast_to(np.asarray(stakes, dtype=np.int64), tails.shape).copy()
        n_nodes = int(n_nodes)
        if len(tails) and (min(tails.min(), heads.min()) < 0 or max(tails.max(), heads.max()) >= n_nodes):
            raise ValueError("arc endpoint outside [0, n_nodes)")
        if np.any(tails == heads):
            raise ValueError("self-arcs are not allowed")
        if np.any(stakes < 0):
            raise ValueError("stake must be non-negative")
        order = np.lexsort((heads, tails))
        tails, heads, stakes = tails[order], heads[order], stakes[order]
        if len(tails) > 1:
            dup = (tails[1:] == tails[:-1]) & (heads[1:] == heads[:-1])
            if dup.any():
                raise ValueError("duplicate arc")
        if labels is None:
            labels = np.arange(n_nodes, dtype=np.int64)
        else:
            labels = np.array(labels, dtype=np.int64)
            if labels.shape != (n_nodes,):
                raise ValueError("labels must have one entry per node")
        return cls(n_nodes, _frozen(tails), _frozen(heads), _frozen(stakes), _frozen(labels))

    @classmethod
    def empty(cls, n_nodes: int = 0) -> "DirectedGraph":
        return cls.from_arcs(n_nodes, [], [])

    @property
    def n_arcs(self) -> int:
        return len(self.tails)

    @property
    def nodes(self) -> range:
        return range(self.n_nodes)

    def arcs(self) -> dict[tuple[int, int], int]:
        return {(int(t), int(h)): int(s) for t, h, s in zip(self.tails, self.heads, self.stakes)}

    def has_arc(self, tail: int, head: int) -> bool:
        lo = np.searchsorted(self.tails, tail, "left")
        hi = np.searchsorted(self.tails, tail, "right")
        return bool(np.any(self.heads[lo:hi] == head))

    def adjacency(self) -> sp.csr_matrix:
        """Sparse ``n x n`` matrix of arc stakes (row = tail)."""
        return sp.csr_matrix(
            (self.stakes, (self.tails, self.heads)), shape=(self.n_nodes, self.n_nodes)
        )

    def undirected_degree(self) -> np.ndarray:
        """Number of distinct neighbours over both arc directions."""
        return np.diff(_undirected_pattern(self).indptr)

    def induced(self, keep) -> "DirectedGraph":
        """Subgraph on the nodes selected by ``keep`` (mask or ids), re-indexed densely."""
        mask = as_mask(self.n_nodes, keep)
        new_id = np.cumsum(mask) - 1
        arc_keep = mask[self.tails] & mask[self.heads]
        return DirectedGraph.from_arcs(
            int(mask.sum()),
            new_id[self.tails[arc_keep]],
            new_id[self.heads[arc_keep]],
            self.stakes[arc_keep],
            self.labels[mask],
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, DirectedGraph):
            return NotImplemented
        return (
            self.n_nodes == other.n_nodes
            and np.array_equal(self.tails, other.tails)
            and np.array_equal(self.heads, other.heads)
            and np.array_equal(self.stakes, other.stakes)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"DirectedGraph(n_nodes={self.n_nodes}, n_arcs={self.n_arcs})"


def as_mask(n: int, nodes) -> np.ndarray:
    """Boolean membership mask of length ``n`` for a node set given as ids or a mask."""
    if isinstance(nodes, np.ndarray) and nodes.dtype == bool:
        if nodes.shape != (n,):
            raise ValueError(f"mask has shape {nodes.shape}, expected ({n},)")
        return nodes
    idx = np.fromiter((int(v) for v in nodes), dtype=np.int64) if not isinstance(nodes, np.ndarray) else nodes.astype(np.int64)
    if len(idx) and (idx.min() < 0 or idx.max() >= n):
        raise ValueError("node outside graph")
    mask = np.zeros(n, dtype=bool)
    mask[idx] = True
    return mask


def _undirected_pattern(g: DirectedGraph) -> sp.csr_matrix:
    a = sp.csr_matrix(
        (np.ones(g.n_arcs, dtype=np.int8), (g.tails, g.heads)), shape=(g.n_nodes, g.n_nodes)
    )
    sym = (a + a.T).tocsr()
    sym.data[:] = 1
    sym.sort_indices()
    return sym


@dataclass(frozen=True)
class LoadStats:
    lines: int
    arcs: int
    duplicates_dropped: int
    self_loops_dropped: int


def _open_source(source) -> BinaryIO:
    if isinstance(source, (str, os.PathLike)):
        path = Path(source)
        if path.suffix == ".gz":
            return gzip.open(path, "rb")
        return open(path, "rb")
    if isinstance(source, (bytes, bytearray)):
        return io.BytesIO(source)
    return source


def load_edge_list(source, default_stake: int = 1) -> tuple[DirectedGraph, LoadStats]:
    """Parse a SNAP-style edge list (``tail head`` per line, ``#`` comments).

    ``source`` is a path (``.gz`` is decompressed), raw bytes or a binary stream.
    Duplicate and self-loop lines are dropped and counted in the returned
    :class:`LoadStats`.  Node ids are remapped to ``[0, N)`` in ascending
    order of their original value.
    """
    tails: list[int] = []
    heads: list[int] = []
    self_loops = 0
    lineno = 0
    stream = _open_source(source)
    try:
        for lineno, raw in enumerate(stream, start=1):
            line = raw.decode("utf-8", "replace") if isinstance(raw, bytes) else raw
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) < 2:
                raise EdgeListError(lineno, line, "expected two node ids")
            try:
                t, h = int(parts[0]), int(parts[1])
            except ValueError:
                raise EdgeListError(lineno, line) from None
            if t == h:
                self_loops += 1
                continue
            tails.append(t)
            heads.append(h)
    finally:
        if stream is not source:
            stream.close()

    t_arr = np.asarray(tails, dtype=np.int64)
    h_arr = np.asarray(heads, dtype=np.int64)
    labels, inverse = np.unique(np.concatenate([t_arr, h_arr]), return_inverse=True)
    t_idx, h_idx = inverse[: len(t_arr)], inverse[len(t_arr):]
    # keep first occurrence of each (tail, head)
    key = t_idx * max(len(labels), 1) + h_idx
    _, first = np.unique(key, return_index=True)
    first.sort()
    dups = len(key) - len(first)
    g = DirectedGraph.from_arcs(len(labels), t_idx[first], h_idx[first], default_stake, labels)
    stats = LoadStats(lines=lineno, arcs=g.n_arcs, duplicates_dropped=dups, self_loops_dropped=self_loops)
    if dups or self_loops:
        log.info("edge list: dropped %d duplicate and %d self-loop lines", dups, self_loops)
    return g, stats


def subsample_nodes(g: DirectedGraph, count: int, seed) -> DirectedGraph:
    """Uniformly sample ``count`` nodes and keep every arc whose tail was sampled.

    Heads outside the sample are kept as nodes, so the result can hold more
    than ``count`` nodes.
    """
    if count < 1 or count > g.n_nodes:
        raise ValueError(f"count must be in [1, {g.n_nodes}], got {count}")
    rng = np.random.default_rng(seed)
    chosen = np.zeros(g.n_nodes, dtype=bool)
    chosen[rng.choice(g.n_nodes, size=count, replace=False)] = True
    arc_keep = chosen[g.tails]
    keep = chosen.copy()
    keep[g.heads[arc_keep]] = True
    new_id = np.cumsum(keep) - 1
    return DirectedGraph.from_arcs(
        int(keep.sum()),
        new_id[g.tails[arc_keep]],
        new_id[g.heads[arc_keep]],
        g.stakes[arc_keep],
        g.labels[keep],
    )


def k_core_prune(g: DirectedGraph, k: int) -> DirectedGraph:
    """Repeatedly drop nodes with fewer than ``k`` distinct neighbours."""
    if k < 1:
        raise ValueError("k must be positive")
    pattern = _undirected_pattern(g)
    indptr, indices = pattern.indptr, pattern.indices
    degree = np.diff(indptr).astype(np.int64)
    alive = np.ones(g.n_nodes, dtype=bool)
    stack = list(np.flatnonzero(degree < k))
    alive[stack] = False
    while stack:
        v = stack.pop()
        for u in indices[indptr[v]:indptr[v + 1]]:
            if alive[u]:
                degree[u] -= 1
                if degree[u] < k:
                    alive[u] = False
                    stack.append(u)
    return g.induced(alive)


def link_count(g, n0, n1) -> int:
    """Number of arcs ``(t, h)`` with ``t`` in ``n0`` and ``h`` in ``n1``.

    Works for any graph object exposing ``n_nodes``, ``tails`` and ``heads``.
    """
    m0 = as_mask(g.n_nodes, n0)
    m1 = as_mask(g.n_nodes, n1)
    return int(np.count_nonzero(m0[g.tails] & m1[g.heads]))


# -- synthetic graphs -------------------------------------------------------

def _symmetric(n: int, u: np.ndarray, v: np.ndarray, stake: int) -> DirectedGraph:
    return DirectedGraph.from_arcs(n, np.concatenate([u, v]), np.concatenate([v, u]), stake)


def preferential_attachment_graph(n: int, m: int, seed, stake: int = 1) -> DirectedGraph:
    """Barabasi-Albert friendship graph with every tie present in both directions.

    Each new node attaches to ``m`` distinct earlier nodes chosen with
    probability proportional to degree; the seed is a star on ``m + 1`` nodes.
    """
    if m < 1 or n <= m:
        raise ValueError("need 1 <= m < n")
    rng = np.random.default_rng(seed)
    # endpoint multiset; sampling from it is degree-proportional
    pool = np.empty(2 * (m + (n - m - 1) * m), dtype=np.int64)
    us, vs = [], []
    star = np.arange(1, m + 1)
    us.append(np.zeros(m, dtype=np.int64))
    vs.append(star)
    pool[: 2 * m] = np.concatenate([np.zeros(m, dtype=np.int64), star])
    filled = 2 * m
    for new in range(m + 1, n):
        targets: set[int] = set()
        while len(targets) < m:
            targets.update(pool[rng.integers(0, filled, size=m - len(targets))].tolist())
        t = np.fromiter(sorted(targets), dtype=np.int64, count=m)
        us.append(np.full(m, new, dtype=np.int64))
        vs.append(t)
        pool[filled:filled + m] = new
        pool[filled + m:filled + 2 * m] = t
        filled += 2 * m
    return _symmetric(n, np.concatenate(us), np.concatenate(vs), stake)


def random_graph(n: int, n_edges: int, seed, stake: int = 1) -> DirectedGraph:
    """Uniform random simple graph with ``n_edges`` undirected edges (both arc directions)."""
    if n_edges > n * (n - 1) // 2:
        raise ValueError("too many edges for a simple graph")
    rng = np.random.default_rng(seed)
    keys: set[int] = set()
    while len(keys) < n_edges:
        a = rng.integers(0, n, size=n_edges - len(keys))
        b = rng.integers(0, n, size=n_edges - len(keys))
        ok = a != b
        lo, hi = np.minimum(a[ok], b[ok]), np.maximum(a[ok], b[ok])
        for key in (lo * n + hi).tolist():
            if len(keys) < n_edges:
                keys.add(key)
    arr = np.fromiter(sorted(keys), dtype=np.int64, count=n_edges)
    return _symmetric(n, arr // n, arr % n, stake)


# -- snapshots ---------------------------------------------------------------

def save_graph(g: DirectedGraph, path) -> str:
    """Write a versioned ``.npz`` snapshot and return its sha256 hex digest."""
    buf = io.BytesIO()
    np.savez(
        buf,
        format=np.array(SNAPSHOT_FORMAT),
        version=np.array(SNAPSHOT_VERSION),
        n_nodes=np.array(g.n_nodes, dtype=np.int64),
        tails=g.tails,
        heads=g.heads,
        stakes=g.stakes,
        labels=g.labels,
    )
    data = buf.getvalue()
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def load_graph(path) -> DirectedGraph:
    with np.load(path, allow_pickle=False) as z:
        if str(z["format"]) != SNAPSHOT_FORMAT or int(z["version"]) != SNAPSHOT_VERSION:
            raise ValueError(f"{path}: not a version {SNAPSHOT_VERSION} graph snapshot")
        return DirectedGraph.from_arcs(int(z["n_nodes"]), z["tails"], z["heads"], z["stakes"], z["labels"])
