"""Trusted sequential reference exploration.

Textbook FIFO breadth-first search over the product, using a plain Python
set for the visited states.  Deliberately shares nothing with the
concurrent hash table so that equivalence tests between the two engines
have diagnostic power.  Visited states are encoded as mixed-radix integers
(not the bit-packed vectors of the parallel engine) for the same reason.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass

from .network import Network, expand


@dataclass(frozen=True)
class OracleResult:
    states: int
    transitions: int
    deadlocks: tuple  # sorted composite states
    state_set: tuple | None  # sorted composite states, or None if not kept
    wall_time: float

    @property
    def throughput(self) -> float:
        return self.states / self.wall_time if self.wall_time > 0 else 0.0


def sequential_bfs(net: Network, keep_states: bool = True,
                   max_states: int | None = None) -> OracleResult:
    """Exhaustive reachability from the initial state.

    ``keep_states=False`` drops the state dump for large products where only
    the counts and deadlocks matter.  ``max_states`` aborts cleanly instead
    of exhausting memory on an unexpectedly large product.
    """
    # Mixed-radix code of a composite state: independent of the bit-packed
    # vector encoding used everywhere else.
    strides = []
    stride = 1
    for p in net.processes:
        strides.append(stride)
        stride *= p.num_states

    def encode(s):
        code = 0
        for v, st in zip(s, strides):
            code += v * st
        return code

    start = time.perf_counter()
    initial = net.initial
    visited = {encode(initial)}
    states = [initial] if keep_states else None
    queue = deque([initial])
    transitions = 0
    deadlocks = []

    while queue:
        s = queue.popleft()
        succs, count = expand(net, s)
        transitions += count
        if not succs:
            deadlocks.append(s)
            continue
        for _, t in succs:
            code = encode(t)
            if code not in visited:
                visited.add(code)
                if max_states is not None and len(visited) > max_states:
                    raise RuntimeError(
                        f"product exceeds max_states={max_states}"
                    )
                if states is not None:
                    states.append(t)
                queue.append(t)

    wall = time.perf_counter() - start
    return OracleResult(
        states=len(visited),
        transitions=transitions,
        deadlocks=tuple(sorted(deadlocks)),
        state_set=tuple(sorted(states)) if states is not None else None,
        wall_time=wall,
    )
