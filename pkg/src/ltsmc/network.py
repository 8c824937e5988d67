"""Synchronous-product semantics for a network of labelled transition
systems.

A composite state is a tuple of per-process state indices.  Successors come
from two sources: actions that appear in no rule for their process are
interleaved freely, and each synchronization rule fires when every
participating process can take its named action simultaneously.  A label
that occurs in at least one rule for a process is never executed
independently by that process, even in rules where its column is `_`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

from .aut import INTERNAL_ACTION, Lts, NetworkDescription, parse_aut, parse_network

CompositeState = tuple  # tuple of per-process state indices


class NetworkError(ValueError):
    """Raised when a description and its processes do not fit together."""


@dataclass(frozen=True)
class SyncRule:
    """A rule with label ids resolved per process.

    ``participants[i]`` is the label id the i-th process must take, or None
    when the process does not take part.  ``enabled`` is False when some
    participating process never uses the named action (the rule can never
    fire but still blocks independent execution of its other columns).
    """

    participants: tuple[int | None, ...]
    result: int  # network-level action id
    enabled: bool = True


@dataclass(frozen=True)
class Network:
    processes: tuple[Lts, ...]
    rules: tuple[SyncRule, ...]
    actions: tuple[str, ...]  # network-level action table
    independent: tuple[frozenset, ...]  # per-process independent label ids
    # per process, per state: tuple of (network action id, dst)
    _indep_moves: tuple = field(repr=False, default=())
    # per rule: tuple of (process index, per-state tuple of dst tuples)
    _rule_moves: tuple = field(repr=False, default=())

    @property
    def initial(self) -> CompositeState:
        return tuple(p.initial for p in self.processes)

    def action_id(self, name: str) -> int | None:
        try:
            return self.actions.index(name)
        except ValueError:
            return None


def build_network(desc: NetworkDescription, ltss: list[Lts] | tuple[Lts, ...]) -> Network:
    """Resolve a parsed description against its process automata.

    Computes the per-process independent label sets (labels occurring in no
    rule column for that process), resolves rule participants to label ids,
    and precomputes the per-state move tables used by :func:`successors`.
    """
    ltss = tuple(ltss)
    if len(ltss) != len(desc.process_files):
        raise NetworkError(
            f"{len(ltss)} automata supplied for {len(desc.process_files)} process files"
        )
    n = len(ltss)
    for rule in desc.rules:
        if rule.arity != n:
            raise NetworkError(f"rule arity {rule.arity} != {n} processes")
        if all(p is None for p in rule.participants):
            raise NetworkError("rule with no participants")
        if INTERNAL_ACTION in rule.participants:
            raise NetworkError("the internal action cannot synchronize")
        present = sum(p is not None for p in rule.participants)
        if present == 1:
            warnings.warn(
                f"rule for action {rule.result!r} has a single participant; "
                "it behaves as a renaming",
                stacklevel=2,
            )

    # Labels synchronized per process: any appearance in a rule column.
    synced: list[set] = [set() for _ in range(n)]
    for rule in desc.rules:
        for i, name in enumerate(rule.participants):
            if name is None:
                continue
            lid = ltss[i].label_id(name)
            if lid is not None:
                synced[i].add(lid)

    independent = tuple(
        frozenset(
            lid for lid in range(len(ltss[i].labels)) if lid not in synced[i]
        )
        for i in range(n)
    )

    # Network action table: rule results first (rule order), then
    # independent labels in (process, label id) order, deduplicated by name.
    actions: list[str] = []
    action_ids: dict[str, int] = {}

    def intern(name: str) -> int:
        aid = action_ids.get(name)
        if aid is None:
            aid = len(actions)
            action_ids[name] = aid
            actions.append(name)
        return aid

    rules = []
    for rule in desc.rules:
        result_id = intern(rule.result)
        participants = []
        enabled = True
        for i, name in enumerate(rule.participants):
            if name is None:
                participants.append(None)
            else:
                lid = ltss[i].label_id(name)
                if lid is None:
                    enabled = False
                participants.append(lid)
        rules.append(
            SyncRule(participants=tuple(participants), result=result_id, enabled=enabled)
        )

    for i in range(n):
        for lid in sorted(independent[i]):
            intern(ltss[i].labels[lid])

    # Per-process, per-state independent moves, in transition order.
    # Duplicate (label, dst) lines within one automaton collapse here.
    indep_moves = []
    for i, lts in enumerate(ltss):
        table = [[] for _ in range(lts.num_states)]
        ind = independent[i]
        for src, lid, dst in lts.transitions:
            if lid in ind:
                move = (action_ids[lts.labels[lid]], dst)
                if move not in table[src]:
                    table[src].append(move)
        indep_moves.append(tuple(tuple(moves) for moves in table))

    # Per-rule, per-participant, per-state destination lists.
    rule_moves = []
    for rule in rules:
        if not rule.enabled:
            rule_moves.append(None)
            continue
        parts = []
        for i, lid in enumerate(rule.participants):
            if lid is None:
                continue
            table = [[] for _ in range(ltss[i].num_states)]
            for src, tl, dst in ltss[i].transitions:
                if tl == lid and dst not in table[src]:
                    table[src].append(dst)
            parts.append((i, tuple(tuple(d) for d in table)))
        rule_moves.append(tuple(parts))

    return Network(
        processes=ltss,
        rules=tuple(rules),
        actions=tuple(actions),
        independent=independent,
        _indep_moves=tuple(indep_moves),
        _rule_moves=tuple(rule_moves),
    )


def expand(net: Network, s: CompositeState) -> tuple:
    """Successor pairs of ``s`` together with its outgoing transition count.

    The pair list contains every enabled (action id, composite state) once,
    in deterministic order: independent moves process-major in transition
    order, then rules in rule order with participant destinations in
    transition order.

    The transition count follows product-LTS conventions instead of pair-set
    cardinality: each process's enabled independent transitions count
    separately even when two processes happen to produce an identical
    (action, state) pair (two idling consumers each contribute their own
    self-loop), while distinct rules firing to the same (action, state) are
    counted once.
    """
    out = []
    seen = set()
    count = 0
    indep_moves = net._indep_moves
    for i in range(len(s)):
        moves = indep_moves[i][s[i]]
        count += len(moves)
        for action, dst in moves:
            t = s[:i] + (dst,) + s[i + 1 :]
            key = (action, t)
            if key not in seen:
                seen.add(key)
                out.append(key)
    fired = None
    for rule, parts in zip(net.rules, net._rule_moves):
        if parts is None:
            continue
        choices = []
        for i, table in parts:
            dsts = table[s[i]]
            if not dsts:
                break
            choices.append(dsts)
        else:
            action = rule.result
            indices = [i for i, _ in parts]
            if fired is None:
                fired = set()
            for combo in product(*choices):
                t = list(s)
                for i, dst in zip(indices, combo):
                    t[i] = dst
                key = (action, tuple(t))
                if key not in fired:
                    fired.add(key)
                    count += 1
                if key not in seen:
                    seen.add(key)
                    out.append(key)
    return out, count


def successors(net: Network, s: CompositeState) -> list:
    """All (action id, composite state) pairs enabled in ``s``; duplicates
    emitted once, order deterministic (see :func:`expand`)."""
    return expand(net, s)[0]


def is_deadlock(net: Network, s: CompositeState) -> bool:
    """True iff ``s`` has no successors."""
    return not successors(net, s)


def load_network(path: str | Path) -> Network:
    """Parse a network file and its process automata (paths are resolved
    relative to the network file) and build the product semantics."""
    path = Path(path)
    desc = parse_network(path.read_text(encoding="utf-8"))
    ltss = []
    for name in desc.process_files:
        aut_path = Path(name)
        if not aut_path.is_absolute():
            aut_path = path.parent / aut_path
        ltss.append(parse_aut(aut_path.read_text(encoding="utf-8")))
    return build_network(desc, ltss)
