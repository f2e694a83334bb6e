# %% [markdown]
# Trust links are stake. Alice locks tokens on a link to Bob; either side can
# later pull the link, and whoever pulls it keeps the stake.

# %%
from sybilquorum.ledger import LinkStatement, SecurityState, apply_statement, apply_statements, to_walk_graph

alice, bob, carol = 0, 1, 2
state = SecurityState.genesis({alice: 10, bob: 10, carol: 10})
state = apply_statement(state, LinkStatement.add(alice, bob, 4, seq=1))
state.balance(alice), state.stake(alice, bob)

# %% [markdown]
# A one-way link does not count for the walk. Once Bob reciprocates, both
# nodes show up with their own committed stake.

# %%
print(to_walk_graph(state))
state = apply_statement(state, LinkStatement.add(bob, alice, 2, seq=1))
walk = to_walk_graph(state)
print(walk.labels, walk.total_stake)

# %% [markdown]
# Replays and overdrafts bounce off without touching the state.

# %%
replay = LinkStatement.add(alice, bob, 4, seq=1)
greedy = LinkStatement.add(carol, alice, 50, seq=1)
after, rejected = apply_statements(state, [replay, greedy])
print([r.reason for r in rejected], after == state)

# %% [markdown]
# Bob steals the stake Alice put on him. Supply is unchanged.

# %%
before = state.total_supply()
state = apply_statement(state, LinkStatement.remove_by_target(alice, bob, seq=2))
print(state.balance(bob), state.total_supply() == before)
