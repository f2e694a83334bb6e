"""Ledger security state: token balances and stake-backed trust links.

Statements are authenticated by construction (the signer is implied by the
statement kind); each carries the signer's next sequence number so replays are
rejected.  States are values: applying statements returns a new state.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graph import DirectedGraph
from .inference import WalkGraph

STATEMENT_LOG_VERSION = 1


class StatementKind(enum.Enum):
    ADD = "add"
    REMOVE_BY_ORIGIN = "remove_by_origin"
    REMOVE_BY_TARGET = "remove_by_target"


class StatementRejected(Exception):
    """A statement that cannot be applied; the state it was applied to is untouched."""

    def __init__(self, stmt: "LinkStatement", reason: str):
        super().__init__(f"{reason}: {stmt}")
        self.statement = stmt
        self.reason = reason


@dataclass(frozen=True)
class LinkStatement:
    kind: StatementKind
    origin: int
    target: int
    seq: int
    value: int = 0

    def __post_init__(self):
        if self.origin == self.target:
            raise ValueError("a link needs two distinct endpoints")
        if self.kind is StatementKind.ADD and self.value <= 0:
            raise ValueError("AddLink value must be positive")

    @property
    def signer(self) -> int:
        return self.target if self.kind is StatementKind.REMOVE_BY_TARGET else self.origin

    @classmethod
    def add(cls, origin: int, target: int, value: int, seq: int) -> "LinkStatement":
        return cls(StatementKind.ADD, origin, target, seq, value)

    @classmethod
    def remove_by_origin(cls, origin: int, target: int, seq: int) -> "LinkStatement":
        return cls(StatementKind.REMOVE_BY_ORIGIN, origin, target, seq)

    @classmethod
    def remove_by_target(cls, origin: int, target: int, seq: int) -> "LinkStatement":
        return cls(StatementKind.REMOVE_BY_TARGET, origin, target, seq)

    def to_json(self) -> str:
        d = {"v": STATEMENT_LOG_VERSION, "kind": self.kind.value, "origin": self.origin,
             "target": self.target, "seq": self.seq}
        if self.kind is StatementKind.ADD:
            d["value"] = self.value
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "LinkStatement":
        d = json.loads(line)
        if d.get("v") != STATEMENT_LOG_VERSION:
            raise ValueError(f"unsupported statement log version {d.get('v')!r}")
        return cls(StatementKind(d["kind"]), int(d["origin"]), int(d["target"]),
                   int(d["seq"]), int(d.get("value", 0)))


@dataclass(frozen=True)
class Account:
    balance: int
    seq: int = 0


class SecurityState:
    """Balances plus the directed graph of staked links.

    Account ids are non-negative integers.  Build states with :meth:`genesis`
    or :meth:`from_graph` and evolve them with :func:`apply_statement` /
    :func:`apply_statements`.
    """

    __slots__ = ("_accounts", "_links")

    def __init__(self, accounts: Mapping[int, Account], links: Mapping[tuple[int, int], int]):
        self._accounts = dict(accounts)
        self._links = dict(links)

    @classmethod
    def genesis(cls, balances: Mapping[int, int] | Sequence[int]) -> "SecurityState":
        if not isinstance(balances, Mapping):
            balances = dict(enumerate(balances))
        if any(b < 0 for b in balances.values()):
            raise ValueError("balances must be non-negative")
        return cls({int(a): Account(int(b)) for a, b in balances.items()}, {})

    @classmethod
    def from_graph(cls, g: DirectedGraph, balance: int | None = None) -> "SecurityState":
        """Give every node of ``g`` the same balance, then stake each arc of ``g``.

        The default balance is the largest total out-stake in ``g``, so every
        node can afford its links.  Links are installed through ordinary
        AddLink statements.
        """
        out = np.bincount(g.tails, weights=g.stakes, minlength=g.n_nodes).astype(np.int64)
        if balance is None:
            balance = int(out.max()) if g.n_nodes else 0
        state = cls.genesis({v: balance for v in range(g.n_nodes)})
        stmts = []
        seq = np.zeros(g.n_nodes, dtype=np.int64)
        for t, h, s in zip(g.tails.tolist(), g.heads.tolist(), g.stakes.tolist()):
            if s <= 0:
                continue
            seq[t] += 1
            stmts.append(LinkStatement.add(t, h, s, int(seq[t])))
        state, rejected = apply_statements(state, stmts)
        if rejected:
            raise ValueError(f"genesis balance {balance} cannot fund {len(rejected)} links")
        return state

    @property
    def accounts(self) -> Mapping[int, Account]:
        return MappingProxyType(self._accounts)

    @property
    def links(self) -> Mapping[tuple[int, int], int]:
        return MappingProxyType(self._links)

    def balance(self, account: int) -> int:
        return self._accounts[account].balance

    def stake(self, origin: int, target: int) -> int:
        return self._links.get((origin, target), 0)

    def total_supply(self) -> int:
        return sum(a.balance for a in self._accounts.values()) + sum(self._links.values())

    def link_graph(self) -> DirectedGraph:
        """Links as a :class:`DirectedGraph`; node ``i`` is the ``i``-th smallest account id."""
        ids = np.array(sorted(self._accounts), dtype=np.int64)
        if not self._links:
            return DirectedGraph.from_arcs(len(ids), [], [], labels=ids)
        arr = np.array([(o, t, s) for (o, t), s in self._links.items()], dtype=np.int64)
        return DirectedGraph.from_arcs(
            len(ids), np.searchsorted(ids, arr[:, 0]), np.searchsorted(ids, arr[:, 1]), arr[:, 2], ids
        )

    def with_accounts(self, balances: Mapping[int, int]) -> "SecurityState":
        """New state with extra funded accounts (new ids only)."""
        clash = set(balances) & set(self._accounts)
        if clash:
            raise ValueError(f"accounts already exist: {sorted(clash)[:5]}")
        accounts = dict(self._accounts)
        accounts.update({int(a): Account(int(b)) for a, b in balances.items()})
        return SecurityState(accounts, self._links)

    def credit(self, amounts: Mapping[int, int]) -> "SecurityState":
        """New state with tokens minted into existing accounts."""
        accounts = dict(self._accounts)
        for a, x in amounts.items():
            acc = accounts[a]
            accounts[a] = Account(acc.balance + int(x), acc.seq)
        return SecurityState(accounts, self._links)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SecurityState):
            return NotImplemented
        return self._accounts == other._accounts and self._links == other._links

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"SecurityState(accounts={len(self._accounts)}, links={len(self._links)})"


def _apply_in_place(accounts: dict, links: dict, stmt: LinkStatement) -> None:
    signer = accounts.get(stmt.signer)
    if signer is None:
        raise StatementRejected(stmt, "unknown signer")
    if stmt.seq != signer.seq + 1:
        raise StatementRejected(stmt, "sequence number mismatch")
    if stmt.origin not in accounts or stmt.target not in accounts:
        raise StatementRejected(stmt, "unknown account")
    key = (stmt.origin, stmt.target)
    if stmt.kind is StatementKind.ADD:
        if key in links:
            raise StatementRejected(stmt, "link already exists")
        if signer.balance < stmt.value:
            raise StatementRejected(stmt, "insufficient balance")
        links[key] = stmt.value
        accounts[stmt.origin] = Account(signer.balance - stmt.value, signer.seq + 1)
        return
    if key not in links:
        raise StatementRejected(stmt, "no such link")
    value = links.pop(key)
    accounts[stmt.signer] = Account(signer.balance + value, signer.seq + 1)


def apply_statement(state: SecurityState, stmt: LinkStatement) -> SecurityState:
    """Apply one statement.  Raises :class:`StatementRejected` if it is invalid."""
    accounts, links = dict(state._accounts), dict(state._links)
    _apply_in_place(accounts, links, stmt)
    return SecurityState(accounts, links)


def apply_statements(
    state: SecurityState, stmts: Iterable[LinkStatement]
) -> tuple[SecurityState, list[StatementRejected]]:
    """Apply statements in order, skipping (and collecting) rejected ones."""
    accounts, links = dict(state._accounts), dict(state._links)
    rejected = []
    for stmt in stmts:
        try:
            _apply_in_place(accounts, links, stmt)
        except StatementRejected as exc:
            rejected.append(exc)
    return SecurityState(accounts, links), rejected


def to_walk_graph(state: SecurityState) -> WalkGraph:
    """Reciprocal links only; walk-graph labels are account ids."""
    return WalkGraph.from_graph(state.link_graph())


def write_statement_log(stmts: Iterable[LinkStatement], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# sybilquorum statement log v{STATEMENT_LOG_VERSION}\n")
        for s in stmts:
            fh.write(s.to_json() + "\n")


def read_statement_log(path) -> list[LinkStatement]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                out.append(LinkStatement.from_json(line))
    return out
