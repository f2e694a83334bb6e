# %% [markdown]
# Two dense communities joined by a thin cut. Short walks from a verifier pile
# up on its own side, so its neighbours score above 1/2 and the far side below.

# %%
import numpy as np

from sybilquorum.graph import DirectedGraph, random_graph
from sybilquorum.inference import (
    CutoffParams,
    WalkGraph,
    honest_set,
    honesty_scores,
    select_cutoff,
    transition_probability,
)

half = 300
left = random_graph(half, 5 * half, seed=1)
right = random_graph(half, 5 * half, seed=2)
rng = np.random.default_rng(0)
bridge_l = rng.choice(half, 15, replace=False)
bridge_r = rng.choice(half, 15, replace=False) + half
tails = np.r_[left.tails, right.tails + half, bridge_l, bridge_r]
heads = np.r_[left.heads, right.heads + half, bridge_r, bridge_l]
g = WalkGraph.from_graph(DirectedGraph.from_arcs(2 * half, tails, heads))
g

# %%
p = g.transition_matrix
print("row sums", np.abs(p.sum(axis=1) - 1).max())
print("pi is stationary", np.abs(p.T @ g.stationary - g.stationary).max())
print("p(1|0) =", transition_probability(g, 0, int(p[0].indices[1])))

# %%
params = CutoffParams()
scores = honesty_scores(g, verifier=0, params=params)
print("walk length", scores.walk_length, "steepness", scores.steepness)
print("median own side ", np.median(scores.scores[:half]))
print("median far side ", np.median(scores.scores[half:]))

# %% [markdown]
# The cut-off is the largest grid value whose split keeps more links inside
# the accepted side than cross into the rejected one.

# %%
y = select_cutoff(g, scores, params)
accepted = honest_set(scores, y)
print("cut-off", y, "accepted", len(accepted), "of which far side", sum(v >= half for v in accepted))
