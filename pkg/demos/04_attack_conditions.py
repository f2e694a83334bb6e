# %% [markdown]
# The whole pipeline at laptop scale: a friendship-style graph, a Sybil region
# grafted onto it, inference from every honest node, and the resulting FBAS
# checked with the Sybils as the bad set.

# %%
from pathlib import Path

from sybilquorum import experiment as ex

cfg = ex.ExperimentConfig(synthetic_nodes=1500, repeats=1, verifiers=10, seed=11,
                          output_dir="demo-out/benign", cache_dir="demo-out/cache")
benign = ex.run_experiment(cfg)
print(ex.format_summary(benign))

# %% [markdown]
# The byzantine condition: a third as many Sybils as honest nodes, and half the
# honest stake spent on links touching them.

# %%
byz = ex.run_experiment(cfg.replace(condition="byzantine", output_dir="demo-out/byzantine"))
rec = byz.repeats[0]
print(rec["attack"])
print(ex.format_summary(byz))

# %% [markdown]
# Verdicts can be recomputed from the stored snapshot alone.

# %%
ex.recheck_snapshot(Path("demo-out/byzantine/snapshots/repeat-000.npz"))
