import numpy as np
import pytest

from sybilquorum.fbas import fbas_from_matrix
from sybilquorum.graph import DirectedGraph
from sybilquorum.inference import WalkGraph


def random_reciprocal_graph(rng, n, p=0.1, max_stake=9, connected=True):
    """Walk graph with independent stakes in each direction of every edge."""
    while True:
        upper = np.triu(rng.random((n, n)) < p, 1)
        if connected:
            # a ring guarantees connectivity
            idx = np.arange(n)
            upper[np.minimum(idx, (idx + 1) % n), np.maximum(idx, (idx + 1) % n)] = True
            upper[np.arange(n), np.arange(n)] = False
        u, v = np.nonzero(upper)
        if len(u):
            break
    tails = np.r_[u, v]
    heads = np.r_[v, u]
    stakes = rng.integers(1, max_stake + 1, size=len(tails))
    return WalkGraph.from_graph(DirectedGraph.from_arcs(n, tails, heads, stakes))


def random_fbas(rng, n, density=None):
    if density is None:
        density = rng.uniform(0.2, 0.95)
    return fbas_from_matrix(rng.random((n, n)) < density)


def random_fbas_family(seed, count, max_nodes=12):
    rng = np.random.default_rng(seed)
    return [random_fbas(rng, int(rng.integers(1, max_nodes + 1))) for _ in range(count)]


def two_cliques(size=4):
    n = 2 * size
    trust = np.zeros((n, n), dtype=bool)
    trust[:size, :size] = True
    trust[size:, size:] = True
    return fbas_from_matrix(trust)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
