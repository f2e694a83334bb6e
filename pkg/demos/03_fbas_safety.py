# %% [markdown]
# Honest sets become threshold slices: a node is satisfied by any subset of its
# set holding more than two thirds of it (itself included).

# %%
import numpy as np

from sybilquorum.fbas import build_fbas, check_fbas, delete_nodes, determine_dset, determine_safety, is_quorum
from sybilquorum.oracle import brute_force_min_quorums, brute_force_quorum_intersection, disjoint_quorums

everyone = build_fbas({v: range(6) for v in range(6)})
everyone.thresholds, is_quorum(everyone, [0, 1, 2, 3, 4]), is_quorum(everyone, [0, 1, 2])

# %%
safe, bounds = determine_safety(everyone)
print(safe, bounds.bounds, brute_force_min_quorums(everyone))

# %% [markdown]
# Two groups that only trust themselves split: both are quorums and they do not
# meet. The size bound cannot prove intersection and the exhaustive search
# finds the split.

# %%
split = build_fbas({**{v: range(4) for v in range(4)}, **{v: range(4, 8) for v in range(4, 8)}})
print(determine_safety(split)[0], brute_force_quorum_intersection(split), disjoint_quorums(split))

# %% [markdown]
# Bad nodes poison whoever leans on them for more than a third of their set.

# %%
chain = build_fbas({0: [0], 1: [0, 1], 2: [1, 2, 3, 4, 5], 3: [3, 4, 5], 4: [3, 4, 5], 5: [3, 4, 5]})
d = determine_dset(chain, [0])
print("closure", sorted(d.nodes), "befouled", sorted(d.befouled), "rest is a quorum", d.available)

# %%
print(delete_nodes(chain, sorted(d.nodes)).thresholds)
print(delete_nodes(chain, sorted(d.nodes), mode="recompute").thresholds)
report = check_fbas(chain, [0])
print(report.live, report.safe, report.min_bound)

# %% [markdown]
# Random small systems: the fixpoint bound never exceeds the true smallest quorum.

# %%
from sybilquorum.fbas import fbas_from_matrix

rng = np.random.default_rng(3)
worst_gap = 0
for _ in range(100):
    n = int(rng.integers(2, 11))
    f = fbas_from_matrix(rng.random((n, n)) < 0.6)
    exact = brute_force_min_quorums(f)
    _, b = determine_safety(f)
    worst_gap = max(worst_gap, max(int(x) - e for x, e in zip(b.bounds, exact) if e is not None))
worst_gap
