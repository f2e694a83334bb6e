"""Stake-weighted random-walk Sybil inference.

The walk runs on the reciprocal trust graph.  From node ``i`` it moves to a
neighbour ``j`` with probability ``min(v_ij, v_ji) / V_i`` (a Metropolis-Hastings
correction of the proposal ``v_ij / V_i``), and stays put with the leftover
mass.  Its stationary distribution is ``pi_i = V_i / sum(V)``.

A verifier compares the distribution after a short walk against ``pi`` and
squashes the difference through a logistic, giving each node an honesty score
in ``[0, 1]``.  A cut-off over a small grid then turns scores into an honest set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Literal, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .graph import DirectedGraph, as_mask


@dataclass(frozen=True, eq=False)
class WalkGraph:
    """Reciprocal stake graph over dense node ids ``[0, n_nodes)``.

    ``labels[i]`` is the id node ``i`` carries in the graph or ledger it was
    derived from.
    """

    n_nodes: int
    tails: np.ndarray
    heads: np.ndarray
    stakes: np.ndarray
    labels: np.ndarray

    @classmethod
    def from_graph(cls, g: DirectedGraph) -> "WalkGraph":
        """Drop unreciprocated arcs, then nodes left without committed stake."""
        a = g.adjacency()
        a.eliminate_zeros()
        pattern = a.copy()
        pattern.data[:] = 1
        recip = pattern.multiply(pattern.T).tocsr()
        # zero-stake arcs were eliminated above, so they never count as reciprocation
        kept = a.multiply(recip).tocsr()
        total = np.asarray(kept.sum(axis=1)).ravel()
        alive = total > 0
        kept = kept[alive][:, alive].tocoo()
        sub = DirectedGraph.from_arcs(int(alive.sum()), kept.row, kept.col, kept.data, g.labels[alive])
        return cls(sub.n_nodes, sub.tails, sub.heads, sub.stakes, sub.labels)

    @property
    def n_arcs(self) -> int:
        return len(self.tails)

    @cached_property
    def total_stake(self) -> np.ndarray:
        """``V_i``: stake node ``i`` commits to its retained links."""
        v = np.bincount(self.tails, weights=self.stakes, minlength=self.n_nodes)
        return v.astype(np.int64) if np.issubdtype(self.stakes.dtype, np.integer) else v

    @cached_property
    def grand_total(self) -> int:
        return int(self.total_stake.sum())

    @cached_property
    def stationary(self) -> np.ndarray:
        return self.total_stake / self.grand_total

    @cached_property
    def transition_matrix(self) -> sp.csr_matrix:
        """Row-stochastic ``P`` with ``P[i, j] = p(j | i)``."""
        n = self.n_nodes
        stake = sp.csr_matrix((self.stakes.astype(float), (self.tails, self.heads)), shape=(n, n))
        low = stake.minimum(stake.T.tocsr()).tocsr()
        off = sp.diags(1.0 / self.total_stake) @ low
        # leftover stake divided once, so the self-loop never goes negative
        kept = np.asarray(low.sum(axis=1)).ravel()
        stay = np.maximum(self.total_stake - kept, 0) / self.total_stake
        p = (off + sp.diags(stay)).tocsr()
        p.sort_indices()
        return p

    @cached_property
    def _propagator(self) -> sp.csr_matrix:
        return self.transition_matrix.T.tocsr()

    def to_graph(self) -> DirectedGraph:
        return DirectedGraph.from_arcs(self.n_nodes, self.tails, self.heads, self.stakes, self.labels)

    def __repr__(self) -> str:
        return f"WalkGraph(n_nodes={self.n_nodes}, n_arcs={self.n_arcs})"


def transition_probability(g: WalkGraph, i: int, j: int) -> float:
    return float(g.transition_matrix[i, j])


def walk_length(n_nodes: int, m: float) -> int:
    return math.ceil(m * math.log(n_nodes)) if n_nodes > 1 else 0


@dataclass(frozen=True)
class WalkDistribution:
    source: int
    length: int
    mass: np.ndarray


def propagate(g: WalkGraph, start: np.ndarray, length: int) -> np.ndarray:
    """Push a distribution (or a matrix of column distributions) ``length`` steps."""
    x = np.asarray(start, dtype=float)
    pt = g._propagator
    for _ in range(length):
        x = pt @ x
    return x


def walk_distribution(g: WalkGraph, source: int, length: int) -> WalkDistribution:
    if not 0 <= source < g.n_nodes:
        raise ValueError("source outside graph")
    if length < 0:
        raise ValueError("length must be non-negative")
    x = np.zeros(g.n_nodes)
    x[source] = 1.0
    return WalkDistribution(source, length, propagate(g, x, length))


def sample_walk_distribution(
    g: WalkGraph, source: int, length: int, n_walks: int, rng: np.random.Generator
) -> WalkDistribution:
    """Monte Carlo estimate of the walk distribution from endpoint counts."""
    p = g.transition_matrix
    indptr, indices, data = p.indptr, p.indices, p.data
    cum = np.empty_like(data)
    for v in range(g.n_nodes):
        cum[indptr[v]:indptr[v + 1]] = np.cumsum(data[indptr[v]:indptr[v + 1]])
    pos = np.full(n_walks, source, dtype=np.int64)
    for _ in range(length):
        u = rng.random(n_walks)
        nxt = np.empty_like(pos)
        for k, v in enumerate(pos):
            row = cum[indptr[v]:indptr[v + 1]]
            nxt[k] = indices[indptr[v] + min(np.searchsorted(row, u[k] * row[-1], "right"), len(row) - 1)]
        pos = nxt
    mass = np.bincount(pos, minlength=g.n_nodes) / n_walks
    return WalkDistribution(source, length, mass)


@dataclass(frozen=True)
class CutoffParams:
    """Knobs for scoring and cut-off selection.

    ``steepness`` is multiplied by the node count before use, since the
    quantities compared are stationary masses of order ``1 / N``.
    ``cut_rule`` picks the right-hand side of the cut test: ``"all"`` counts
    arcs entering the presumed-Sybil set from any node, ``"honest"`` only
    those coming from the presumed-honest set.
    """

    y_min: float = 0.45
    y_max: float = 0.55
    y_step: float = 0.01
    walk_multiplier: float = 3.0
    steepness: float = 10.0
    cut_rule: Literal["all", "honest"] = "all"

    def __post_init__(self):
        if not 0 < self.y_min < self.y_max < 1:
            raise ValueError("need 0 < y_min < y_max < 1")
        if self.y_step <= 0 or self.walk_multiplier <= 0 or self.steepness <= 0:
            raise ValueError("y_step, walk_multiplier and steepness must be positive")
        if self.cut_rule not in ("all", "honest"):
            raise ValueError(f"unknown cut_rule {self.cut_rule!r}")

    def grid(self) -> np.ndarray:
        steps = int(round((self.y_max - self.y_min) / self.y_step))
        return np.round(self.y_min + self.y_step * np.arange(steps + 1), 10)

    def effective_steepness(self, n_nodes: int) -> float:
        return self.steepness * n_nodes


@dataclass(frozen=True)
class ScoreMap:
    verifier: int
    scores: np.ndarray
    walk_length: int
    steepness: float

    def __getitem__(self, node: int) -> float:
        return float(self.scores[node])


def logistic(x, x0, k):
    return expit(k * (np.asarray(x) - x0))


def _scores_from_mass(g: WalkGraph, mass: np.ndarray, k_eff: float) -> np.ndarray:
    pi = g.stationary
    return expit(k_eff * (mass - (pi[:, None] if mass.ndim == 2 else pi)))


def honesty_scores(
    g: WalkGraph,
    verifier: int,
    params: CutoffParams = CutoffParams(),
    *,
    n_walks: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> ScoreMap:
    """Score every node from ``verifier``'s point of view.

    With ``n_walks`` set, the short-walk distribution is estimated from that
    many sampled walks instead of computed exactly.
    """
    length = walk_length(g.n_nodes, params.walk_multiplier)
    if n_walks:
        dist = sample_walk_distribution(g, verifier, length, n_walks, rng or np.random.default_rng())
    else:
        dist = walk_distribution(g, verifier, length)
    k_eff = params.effective_steepness(g.n_nodes)
    scores = _scores_from_mass(g, dist.mass, k_eff)
    scores[verifier] = 1.0
    return ScoreMap(verifier, scores, length, k_eff)


def _cut_ok(g, honest: np.ndarray, rule: str) -> np.ndarray:
    """Cut test for a boolean matrix whose columns are candidate honest sets."""
    h_tail = honest[g.tails]
    h_head = honest[g.heads]
    inside = np.count_nonzero(h_tail & h_head, axis=0)
    into_sybil = ~h_head if rule == "all" else h_tail & ~h_head
    return inside > np.count_nonzero(into_sybil, axis=0)


def select_cutoff(g: WalkGraph, scores: ScoreMap, params: CutoffParams = CutoffParams()) -> float:
    """Largest grid cut-off whose honest/Sybil partition passes the cut test.

    Falls back to ``y_min`` when no grid point passes.
    """
    return float(_select_cutoffs(g, scores.scores[:, None], params)[0])


def _select_cutoffs(g, score_cols: np.ndarray, params: CutoffParams) -> np.ndarray:
    best = np.full(score_cols.shape[1], params.y_min)
    for y in params.grid():
        ok = _cut_ok(g, score_cols >= y, params.cut_rule)
        best = np.where(ok, y, best)
    return best


def honest_set(scores: ScoreMap, y: float) -> frozenset[int]:
    mask = scores.scores >= y
    mask[scores.verifier] = True
    return frozenset(np.flatnonzero(mask).tolist())


@dataclass(frozen=True)
class InferenceResult:
    """Cut-offs and honest sets for a batch of verifiers.

    ``honest[r]`` is the membership mask of ``verifiers[r]``'s honest set.
    """

    verifiers: np.ndarray
    cutoffs: np.ndarray
    honest: np.ndarray
    walk_length: int
    steepness: float
    min_scores: np.ndarray = field(repr=False)


def infer_honest_sets(
    g: WalkGraph,
    verifiers: Sequence[int] | np.ndarray,
    params: CutoffParams = CutoffParams(),
    chunk_size: int = 256,
) -> InferenceResult:
    """Run scoring and cut-off selection for many verifiers at once.

    Columns are propagated independently, so each verifier's result does not
    depend on which other verifiers share its chunk.
    """
    verifiers = np.asarray(verifiers, dtype=np.int64)
    length = walk_length(g.n_nodes, params.walk_multiplier)
    k_eff = params.effective_steepness(g.n_nodes)
    cutoffs = np.empty(len(verifiers))
    honest = np.zeros((len(verifiers), g.n_nodes), dtype=bool)
    min_scores = np.empty(len(verifiers))
    for lo in range(0, len(verifiers), chunk_size):
        batch = verifiers[lo:lo + chunk_size]
        cols = np.arange(len(batch))
        x = np.zeros((g.n_nodes, len(batch)))
        x[batch, cols] = 1.0
        s = _scores_from_mass(g, propagate(g, x, length), k_eff)
        s[batch, cols] = 1.0
        y = _select_cutoffs(g, s, params)
        cutoffs[lo:lo + len(batch)] = y
        honest[lo:lo + len(batch)] = (s >= y).T
        min_scores[lo:lo + len(batch)] = s.min(axis=0)
    return InferenceResult(verifiers, cutoffs, honest, length, k_eff, min_scores)


def node_mask(g: WalkGraph, nodes: Iterable[int]) -> np.ndarray:
    return as_mask(g.n_nodes, nodes)
