"""Sybil-region injection into an honest security state.

Budgets ``sybil_links`` and ``attack_links`` are stake totals.  Every injected
link is mutual: one pair of arcs, each carrying ``stake_per_link``.  A budget
of ``b`` therefore buys ``b / stake_per_link`` mutual pairs.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .ledger import LinkStatement, SecurityState, apply_statements, to_walk_graph


class AttackError(ValueError):
    pass


@dataclass(frozen=True)
class AttackParams:
    n_sybils: int = 0
    sybil_links: int = 0
    attack_links: int = 0
    naive_fraction: float = 1.0
    stake_per_link: int = 1
    max_links_per_naive: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.n_sybils < 0 or self.sybil_links < 0 or self.attack_links < 0:
            raise AttackError("counts and budgets must be non-negative")
        if not 0.0 <= self.naive_fraction <= 1.0:
            raise AttackError("naive_fraction must lie in [0, 1]")
        if self.stake_per_link <= 0:
            raise AttackError("stake_per_link must be positive")
        if self.max_links_per_naive is not None and self.max_links_per_naive < 1:
            raise AttackError("max_links_per_naive must be at least 1")
        for name in ("sybil_links", "attack_links"):
            if getattr(self, name) % self.stake_per_link:
                raise AttackError(f"{name} must be a multiple of stake_per_link")

    @property
    def sybil_pairs(self) -> int:
        return self.sybil_links // self.stake_per_link

    @property
    def attack_pairs(self) -> int:
        return self.attack_links // self.stake_per_link

    def to_dict(self) -> dict:
        return asdict(self)


def benign_preset(seed: int = 0) -> AttackParams:
    """One Sybil, no Sybil-internal stake, two attachment links, every honest node naive."""
    return AttackParams(n_sybils=1, sybil_links=0, attack_links=2, naive_fraction=1.0, seed=seed)


def honest_region_stake(state: SecurityState) -> int:
    """Stake on reciprocal links, one side per mutual pair.

    For unit stakes this is the number of mutual honest links.
    """
    w = to_walk_graph(state)
    return w.grand_total // 2


def byzantine_preset(
    n_honest: int, region_stake: int, stake_per_link: int = 1, seed: int = 0
) -> AttackParams:
    """Largest attack the stake cap allows.

    A third as many Sybils as honest nodes.  The stake touching Sybils is half
    the honest-region stake; the Sybil region is given the honest region's
    density and the rest goes to attachment links.  Attachments are spread
    thinly over the naive nodes (as few partners per naive node as the budget
    allows).
    """
    n_s = n_honest // 3
    cap_pairs = region_stake // (2 * stake_per_link)
    max_pairs = n_s * (n_s - 1) // 2
    s_pairs = min(round(n_s * region_stake / (n_honest * stake_per_link)), cap_pairs, max_pairs)
    a_pairs = cap_pairs - s_pairs
    per_naive = max(1, math.ceil(a_pairs / n_honest)) if n_honest else 1
    return AttackParams(
        n_sybils=n_s,
        sybil_links=s_pairs * stake_per_link,
        attack_links=a_pairs * stake_per_link,
        naive_fraction=1.0,
        stake_per_link=stake_per_link,
        max_links_per_naive=per_naive,
        seed=seed,
    )


@dataclass(frozen=True)
class AttackOutcome:
    """Attacked state plus ground truth.

    ``minted`` lists tokens created at injection: the Sybils' funding, and top-ups
    for naive honest accounts that could not afford their side of a link.
    """

    state: SecurityState
    params: AttackParams
    honest: np.ndarray
    sybils: np.ndarray
    naive: np.ndarray
    sybil_pairs: np.ndarray = field(repr=False)
    attack_pairs: np.ndarray = field(repr=False)
    minted: dict = field(repr=False)

    @property
    def minted_total(self) -> int:
        return int(sum(self.minted.values()))


def _decode_pairs(k: np.ndarray, n: int) -> np.ndarray:
    """Map lexicographic indices into ``{(a, b): 0 <= a < b < n}`` to pairs."""
    k = np.asarray(k, dtype=np.int64)
    total = n * (n - 1) // 2
    r = total - 1 - k  # index counted from the end
    # the reversed problem is a triangle whose rows have lengths 1, 2, ...
    row = ((np.sqrt(8.0 * r + 1) - 1) // 2).astype(np.int64)
    # guard against float rounding at row boundaries
    row -= (row * (row + 1) // 2 > r)
    row += ((row + 1) * (row + 2) // 2 <= r)
    a = n - 2 - row
    b = n - 1 - (r - row * (row + 1) // 2)
    return np.stack([a, b], axis=1)


def _sybil_region(n_s: int, pairs: int, rng: np.random.Generator) -> np.ndarray:
    total = n_s * (n_s - 1) // 2
    if pairs > total:
        raise AttackError(f"{pairs} Sybil pairs requested but only {total} exist")
    if pairs == 0:
        return np.empty((0, 2), dtype=np.int64)
    idx = np.sort(rng.choice(total, size=pairs, replace=False))
    return _decode_pairs(idx, n_s)


def _attachments(
    naive: np.ndarray, n_s: int, pairs: int, cap: Optional[int], rng: np.random.Generator
) -> np.ndarray:
    per_node = n_s if cap is None else min(cap, n_s)
    available = len(naive) * per_node
    if pairs > available:
        raise AttackError(f"{pairs} attachment pairs requested but only {available} are possible")
    chosen: set[tuple[int, int]] = set()
    load = dict.fromkeys(naive.tolist(), 0)
    out = []
    while len(out) < pairs:
        batch = max(64, 2 * (pairs - len(out)))
        hs = rng.integers(0, len(naive), size=batch)
        ss = rng.integers(0, n_s, size=batch)
        for hi, s in zip(hs.tolist(), ss.tolist()):
            h = int(naive[hi])
            if (h, s) in chosen or load[h] >= per_node:
                continue
            chosen.add((h, s))
            load[h] += 1
            out.append((h, s))
            if len(out) == pairs:
                break
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def inject_attack(state: SecurityState, params: AttackParams) -> AttackOutcome:
    """Add ``n_sybils`` fresh accounts and their mutual links to ``state``.

    Sybil ids follow the largest existing account id.  The honest region is
    left untouched.
    """
    honest = np.array(sorted(state.accounts), dtype=np.int64)
    if len(honest) == 0:
        raise AttackError("honest state has no accounts")
    rng = np.random.default_rng(params.seed)
    n_s = params.n_sybils
    first = int(honest[-1]) + 1
    sybils = np.arange(first, first + n_s, dtype=np.int64)

    s_pairs = _sybil_region(n_s, params.sybil_pairs, rng)
    n_naive = math.ceil(params.naive_fraction * len(honest))
    naive = np.sort(rng.choice(honest, size=n_naive, replace=False)) if n_naive else honest[:0]
    a_pairs = _attachments(naive, n_s, params.attack_pairs, params.max_links_per_naive, rng)
    if n_s == 0:
        return AttackOutcome(state, params, honest, sybils, naive, s_pairs, a_pairs, {})

    stake = params.stake_per_link
    s_ids = sybils[s_pairs] if len(s_pairs) else s_pairs
    a_sybil = sybils[a_pairs[:, 1]] if len(a_pairs) else a_pairs[:, 1]
    a_honest = a_pairs[:, 0]

    # what each account must commit
    sybil_need = np.bincount(np.r_[s_ids.ravel(), a_sybil] - first, minlength=n_s) * stake
    honest_need: dict[int, int] = {}
    for h in a_honest.tolist():
        honest_need[h] = honest_need.get(h, 0) + stake
    minted = {int(s): int(x) for s, x in zip(sybils, sybil_need)}
    topup = {h: need - state.balance(h) for h, need in honest_need.items() if state.balance(h) < need}
    minted.update(topup)

    attacked = state.with_accounts({int(s): int(x) for s, x in zip(sybils, sybil_need)}).credit(topup)

    seq = {a: acc.seq for a, acc in attacked.accounts.items()}
    stmts = []

    def add(o, t):
        seq[o] += 1
        stmts.append(LinkStatement.add(o, t, stake, seq[o]))

    for a, b in s_ids.tolist():
        add(a, b)
        add(b, a)
    for h, s in zip(a_honest.tolist(), a_sybil.tolist()):
        add(h, s)
        add(s, h)
    attacked, rejected = apply_statements(attacked, stmts)
    if rejected:
        raise AttackError(f"{len(rejected)} injected statements rejected, first: {rejected[0]}")
    return AttackOutcome(attacked, params, honest, sybils, naive, s_pairs, a_pairs, minted)
