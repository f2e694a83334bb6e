"""Threshold FBAS built from per-node trust sets, with safety and liveness checks.

A node ``v`` trusts the set ``H(v)`` (always containing ``v``) and accepts as a
quorum slice any subset of ``H(v)`` that contains ``v`` and has at least
``t(v)`` members.  Slices are never enumerated; every check works on the
``(H(v), t(v))`` pair.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Literal, Mapping, Optional

import numpy as np

from .graph import as_mask


class FbasError(ValueError):
    pass


def two_thirds_threshold(size):
    """Smallest integer strictly greater than two thirds of ``size``."""
    return 2 * np.asarray(size) // 3 + 1


@dataclass(frozen=True, eq=False)
class Fbas:
    """Nodes ``0..n-1``; ``trust[v]`` is the membership mask of ``H(v)``.

    ``labels`` holds the external node ids.
    """

    trust: np.ndarray
    thresholds: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        n = len(self.labels)
        if self.trust.shape != (n, n) or self.trust.dtype != bool:
            raise FbasError("trust must be a boolean n x n matrix")
        if n and not self.trust[np.arange(n), np.arange(n)].all():
            raise FbasError("every node must trust itself")
        sizes = self.trust.sum(axis=1)
        if np.any(self.thresholds < 1) or np.any(self.thresholds > sizes):
            raise FbasError("thresholds must lie in [1, |H(v)|]")
        for a in (self.trust, self.thresholds, self.labels):
            a.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.labels)

    @property
    def trust_sizes(self) -> np.ndarray:
        return self.trust.sum(axis=1)

    def trust_set(self, v: int) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.trust[v]).tolist())

    def index_of(self, label: int) -> int:
        i = int(np.searchsorted(self.labels, label))
        if i >= self.n_nodes or self.labels[i] != label:
            raise KeyError(label)
        return i

    def __eq__(self, other) -> bool:
        if not isinstance(other, Fbas):
            return NotImplemented
        return (np.array_equal(self.trust, other.trust)
                and np.array_equal(self.thresholds, other.thresholds)
                and np.array_equal(self.labels, other.labels))

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Fbas(n_nodes={self.n_nodes})"


def fbas_from_matrix(trust: np.ndarray, labels=None, thresholds=None) -> Fbas:
    """Fbas from a boolean trust matrix; self-trust is added where missing."""
    trust = np.array(trust, dtype=bool)
    n = trust.shape[0]
    trust[np.arange(n), np.arange(n)] = True
    if thresholds is None:
        thresholds = two_thirds_threshold(trust.sum(axis=1))
    labels = np.arange(n, dtype=np.int64) if labels is None else np.asarray(labels, dtype=np.int64)
    return Fbas(trust, np.asarray(thresholds, dtype=np.int64), labels.copy())


def build_fbas(honest_sets: Mapping[int, Iterable[int]]) -> Fbas:
    """Fbas whose node set is the keys of ``honest_sets``.

    Every member of a trust set must itself be a key.  Each node is added to
    its own set if absent; thresholds are ``floor(2|H|/3) + 1``.
    """
    labels = np.array(sorted(int(k) for k in honest_sets), dtype=np.int64)
    n = len(labels)
    trust = np.zeros((n, n), dtype=bool)
    for key, members in honest_sets.items():
        members = [int(m) for m in members]
        v = int(np.searchsorted(labels, key))
        if not members:
            raise FbasError(f"node {key} has an empty honest set")
        idx = np.searchsorted(labels, members)
        if len(members) and (np.any(idx >= n) or np.any(labels[np.minimum(idx, n - 1)] != members)):
            raise FbasError(f"honest set of {key} names nodes outside the system")
        trust[v, idx] = True
    return fbas_from_matrix(trust, labels)


def min_slice_cardinality(f: Fbas, v: int) -> int:
    return int(f.thresholds[v])


def is_quorum(f: Fbas, u) -> bool:
    """Non-empty ``u`` containing at least ``t(v)`` members of ``H(v)`` for each ``v`` in it."""
    mask = as_mask(f.n_nodes, u)
    members = np.flatnonzero(mask)
    if len(members) == 0:
        return False
    inside = np.count_nonzero(f.trust[members][:, mask], axis=1)
    return bool(np.all(inside >= f.thresholds[members]))


@dataclass(frozen=True)
class DSet:
    """Closure of a bad set under befouling, plus the liveness verdict.

    ``available`` is true when the remaining nodes form a quorum.  An empty
    remainder is not a quorum, so a closure that swallows every node is not
    available.
    """

    nodes: frozenset[int]
    befouled: frozenset[int]
    available: bool
    rounds: int


def _closure(f: Fbas, bad: np.ndarray) -> tuple[np.ndarray, int]:
    b = bad.copy()
    sizes = f.trust_sizes
    rounds = 0
    while True:
        hit = np.count_nonzero(f.trust & b[None, :], axis=1)
        new = ~b & (3 * hit > sizes)
        if not new.any():
            return b, rounds
        b |= new
        rounds += 1


def determine_dset(f: Fbas, bad) -> DSet:
    """Grow ``bad`` with every node whose trust set is more than a third bad or befouled."""
    seed = as_mask(f.n_nodes, bad)
    closed, rounds = _closure(f, seed)
    available = is_quorum(f, ~closed)
    return DSet(
        nodes=frozenset(np.flatnonzero(closed).tolist()),
        befouled=frozenset(np.flatnonzero(closed & ~seed).tolist()),
        available=available,
        rounds=rounds,
    )


DeleteMode = Literal["literal", "recompute"]


def delete_nodes(f: Fbas, b, mode: DeleteMode = "literal") -> Fbas:
    """Remove ``b`` from the system.

    ``"literal"`` keeps exactly the slices ``q \\ b``: the threshold drops by
    the number of deleted trusted nodes (never below 1).  ``"recompute"``
    re-applies the two-thirds rule to the surviving trust set.
    """
    gone = as_mask(f.n_nodes, b)
    keep = ~gone
    trust = f.trust[keep][:, keep]
    if mode == "literal":
        lost = np.count_nonzero(f.trust[keep][:, gone], axis=1)
        thresholds = np.maximum(f.thresholds[keep] - lost, 1)
    elif mode == "recompute":
        thresholds = two_thirds_threshold(trust.sum(axis=1))
    else:
        raise ValueError(f"unknown delete mode {mode!r}")
    return Fbas(trust.copy(), np.asarray(thresholds, dtype=np.int64), f.labels[keep].copy())


@dataclass(frozen=True)
class CardinalityBound:
    """Lower bounds on the size of any quorum containing each node."""

    bounds: np.ndarray
    iterations: int
    history: Optional[list] = field(default=None, repr=False)

    def __getitem__(self, v: int) -> int:
        return int(self.bounds[v])


def quorum_size_bounds(f: Fbas, keep_history: bool = False) -> CardinalityBound:
    """Iterate ``F(v) <- max(F(v), t(v)-th smallest F over H(v))`` to a fixpoint.

    Starts from ``F(v) = t(v)``.  Each round reads only the previous round's
    values.
    """
    rows = [np.flatnonzero(f.trust[v]) for v in range(f.n_nodes)]
    t = f.thresholds
    cur = t.astype(np.int64).copy()
    history = [cur.copy()] if keep_history else None
    iterations = 0
    while True:
        nxt = cur.copy()
        for v, members in enumerate(rows):
            kth = np.partition(cur[members], t[v] - 1)[t[v] - 1]
            if kth > nxt[v]:
                nxt[v] = kth
        iterations += 1
        if keep_history:
            history.append(nxt.copy())
        if np.array_equal(nxt, cur):
            return CardinalityBound(cur, iterations, history)
        cur = nxt


def determine_safety(f: Fbas, keep_history: bool = False) -> tuple[bool, CardinalityBound]:
    """Sufficient test for quorum intersection: every quorum exceeds half the nodes."""
    bounds = quorum_size_bounds(f, keep_history)
    safe = bool(np.all(2 * bounds.bounds > f.n_nodes))
    return safe, bounds


@dataclass(frozen=True)
class SafetyReport:
    dset: DSet
    safe: bool
    bounds: CardinalityBound
    residual_nodes: int

    @property
    def live(self) -> bool:
        return self.dset.available

    @property
    def min_bound(self) -> Optional[int]:
        return int(self.bounds.bounds.min()) if len(self.bounds.bounds) else None


def check_fbas(f: Fbas, bad=(), mode: DeleteMode = "literal") -> SafetyReport:
    """Close ``bad`` under befouling, delete it, and test the rest for intersection."""
    dset = determine_dset(f, bad)
    rest = delete_nodes(f, sorted(dset.nodes), mode)
    safe, bounds = determine_safety(rest)
    return SafetyReport(dset, safe, bounds, rest.n_nodes)


# -- text format ---------------------------------------------------------------
#
#   # fbas v1
#   <node>: <member> <member> ...
#   <node> [t=<threshold>]: <member> ...
#
# Members are external ids.  A threshold is written only when it differs from
# the two-thirds rule.

FBAS_FORMAT_HEADER = "# fbas v1"


def dumps_fbas(f: Fbas) -> str:
    lines = [FBAS_FORMAT_HEADER]
    default = two_thirds_threshold(f.trust_sizes)
    for v in range(f.n_nodes):
        members = " ".join(str(x) for x in f.labels[f.trust[v]])
        tag = "" if f.thresholds[v] == default[v] else f" [t={int(f.thresholds[v])}]"
        lines.append(f"{f.labels[v]}{tag}: {members}")
    return "\n".join(lines) + "\n"


def loads_fbas(text: str) -> Fbas:
    header_seen = False
    sets: dict[int, list[int]] = {}
    explicit: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.replace(" ", "") == FBAS_FORMAT_HEADER.replace(" ", ""):
                header_seen = True
            continue
        head, sep, rest = line.partition(":")
        if not sep:
            raise FbasError(f"line {lineno}: expected '<node>: <members>'")
        head = head.strip()
        try:
            if "[" in head:
                node_s, _, tag = head.partition("[")
                node = int(node_s)
                tag = tag.rstrip("]").strip()
                if not tag.startswith("t="):
                    raise ValueError(tag)
                explicit[node] = int(tag[2:])
            else:
                node = int(head)
            members = [int(x) for x in rest.split()]
        except ValueError:
            raise FbasError(f"line {lineno}: malformed record {raw!r}") from None
        if node in sets:
            raise FbasError(f"line {lineno}: node {node} listed twice")
        sets[node] = members
    if not header_seen:
        raise FbasError("missing '# fbas v1' header")
    f = build_fbas(sets)
    if explicit:
        t = f.thresholds.copy()
        for node, th in explicit.items():
            t[f.index_of(node)] = th
        f = Fbas(f.trust.copy(), t, f.labels.copy())
    return f


def read_fbas(path) -> Fbas:
    with open(path, encoding="utf-8") as fh:
        return loads_fbas(fh.read())


def write_fbas(f: Fbas, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_fbas(f))
