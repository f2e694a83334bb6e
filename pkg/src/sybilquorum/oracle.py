"""Exhaustive checks for small FBAS instances.

These enumerate subsets (and, for :func:`enumerate_slices`, the slices
themselves), so they are exponential and refuse instances above a node bound.
They exist to cross-check the threshold-form algorithms in :mod:`.fbas`.
"""
from __future__ import annotations

from itertools import combinations
from typing import Optional

import numpy as np

from .fbas import Fbas

DEFAULT_ORACLE_BOUND = 16


class OracleBoundError(ValueError):
    """Instance is too large to enumerate."""


def _check_bound(f: Fbas, bound: int) -> None:
    if f.n_nodes > bound:
        raise OracleBoundError(f"{f.n_nodes} nodes exceeds oracle bound {bound}")


def _bits(f: Fbas) -> np.ndarray:
    """Trust sets as integer bitmasks."""
    weights = 1 << np.arange(f.n_nodes, dtype=np.int64)
    return (f.trust.astype(np.int64) * weights).sum(axis=1)


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.int64)
    count = np.zeros_like(x)
    while np.any(x):
        count += x & 1
        x >>= 1
    return count


def quorum_masks(f: Fbas, bound: int = DEFAULT_ORACLE_BOUND) -> np.ndarray:
    """Bitmasks of every quorum, in increasing numeric order."""
    _check_bound(f, bound)
    n = f.n_nodes
    subsets = np.arange(1, 1 << n, dtype=np.int64)
    ok = np.ones(len(subsets), dtype=bool)
    for v, (h, t) in enumerate(zip(_bits(f), f.thresholds)):
        member = (subsets >> v) & 1 == 1
        enough = _popcount(subsets & h) >= t
        ok &= ~member | enough
    return subsets[ok]


def enumerate_slices(f: Fbas, v: int) -> list[frozenset[int]]:
    """Every slice of ``v`` spelled out: subsets of ``H(v)`` containing ``v`` of size ``>= t(v)``."""
    others = sorted(f.trust_set(v) - {v})
    t = int(f.thresholds[v])
    out = []
    for size in range(max(t - 1, 0), len(others) + 1):
        for combo in combinations(others, size):
            out.append(frozenset((v, *combo)))
    return out


def is_quorum_by_slices(f: Fbas, u) -> bool:
    """Quorum test straight from the definition: some slice of each member lies inside ``u``."""
    u = frozenset(int(x) for x in u)
    if not u:
        return False
    return all(any(q <= u for q in enumerate_slices(f, v)) for v in u)


def brute_force_min_quorum(f: Fbas, v: int, bound: int = DEFAULT_ORACLE_BOUND) -> Optional[int]:
    """Size of the smallest quorum containing ``v``, or ``None`` if there is none."""
    masks = quorum_masks(f, bound)
    hit = masks[(masks >> v) & 1 == 1]
    if len(hit) == 0:
        return None
    return int(_popcount(hit).min())


def brute_force_min_quorums(f: Fbas, bound: int = DEFAULT_ORACLE_BOUND) -> list[Optional[int]]:
    """:func:`brute_force_min_quorum` for every node, sharing one enumeration."""
    masks = quorum_masks(f, bound)
    sizes = _popcount(masks)
    out = []
    for v in range(f.n_nodes):
        sel = (masks >> v) & 1 == 1
        out.append(int(sizes[sel].min()) if sel.any() else None)
    return out


def minimal_quorums(f: Fbas, bound: int = DEFAULT_ORACLE_BOUND) -> list[int]:
    masks = quorum_masks(f, bound)
    order = np.argsort(_popcount(masks), kind="stable")
    minimal: list[int] = []
    for m in masks[order].tolist():
        if not any(q & m == q for q in minimal):
            minimal.append(m)
    return minimal


def brute_force_quorum_intersection(f: Fbas, bound: int = DEFAULT_ORACLE_BOUND) -> bool:
    """True iff every two quorums share a node (checked on minimal quorums)."""
    minimal = minimal_quorums(f, bound)
    return all(a & b for a, b in combinations(minimal, 2))


def disjoint_quorums(f: Fbas, bound: int = DEFAULT_ORACLE_BOUND) -> Optional[tuple[frozenset, frozenset]]:
    """A pair of disjoint quorums, if one exists."""
    minimal = minimal_quorums(f, bound)
    for a, b in combinations(minimal, 2):
        if not a & b:
            return mask_to_set(a), mask_to_set(b)
    return None


def mask_to_set(mask: int) -> frozenset[int]:
    return frozenset(i for i in range(mask.bit_length()) if mask >> i & 1)


def fixpoint_any_order(f: Fbas, bad, rng: np.random.Generator) -> frozenset[int]:
    """Befouling closure recomputed one node at a time in a shuffled order."""
    b = set(int(x) for x in bad)
    sizes = f.trust_sizes
    changed = True
    while changed:
        changed = False
        for v in rng.permutation(f.n_nodes).tolist():
            if v in b:
                continue
            members = np.flatnonzero(f.trust[v])
            if 3 * sum(int(m) in b for m in members) > sizes[v]:
                b.add(v)
                changed = True
    return frozenset(b)
