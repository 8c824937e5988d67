"""Parallel breadth-first reachability over a network's product, using the
shared state table as the combined open/closed set.

The driver packs the initial state into the table, then runs workers in
globally barrier-synchronized rounds: each worker scans its bucket range
for slots still marked new (scans are snapshotted at the round start,
before anyone expands), claims them one by one, computes successors,
filters them through a worker-local cache and flushes the cache to the
shared table before the round ends.  A round in which no worker claims
anything terminates the search.  Rounds are not strict BFS layers: a state
lands in the round after the one that discovered it, whatever its depth,
and counts never depend on level numbers.

Workers can be threads or forked processes.  Results are identical either
way (and across worker counts, bucket sizes and seeds); processes buy real
CPU parallelism on this interpreter, threads start faster.
"""

from __future__ import annotations

import mmap
import multiprocessing
import threading
import time
import traceback
from dataclasses import dataclass, field

import numpy as np

from . import statevec
from .hashtable import TABLE_FULL, StateTable, TableConfig, TableFullError
from .network import Network, expand

COMPLETE = "COMPLETE"
OUTCOME_TABLE_FULL = "TABLE_FULL"
ITERATION_CAP = "ITERATION_CAP"

DEADLOCK_KEEP = 100
_BARRIER_TIMEOUT = 600.0

# control-block columns, one row per worker
_CLAIMS, _EXPANDED, _GENERATED, _CACHE_HITS, _CACHE_LOOKUPS = range(5)
# global flag cells
_ABORT, _ERROR, _ROUNDS, _DL_COUNT, _CAPPED = range(5)


@dataclass(frozen=True)
class ExploreConfig:
    workers: int = 1
    table: TableConfig = field(default_factory=TableConfig)
    cache_slots: int = 4096
    detect_deadlocks: bool = False
    max_iterations: int | None = None
    # "threads", "processes" or "auto" (processes when workers > 1 and the
    # platform can fork, else threads)
    backend: str = "auto"

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.cache_slots < 1:
            raise ValueError("cache_slots must be >= 1")


@dataclass(frozen=True)
class ExplorationReport:
    states: int
    transitions: int
    deadlocks: tuple  # sorted composite states, at most DEADLOCK_KEEP
    deadlocks_total: int
    expanded: int
    iterations: int
    wall_time: float
    throughput: float
    outcome: str

    def to_dict(self) -> dict:
        return {
            "states": self.states,
            "transitions": self.transitions,
            "deadlocks": [list(s) for s in self.deadlocks],
            "deadlocks_total": self.deadlocks_total,
            "expanded": self.expanded,
            "iterations": self.iterations,
            "wall_time": self.wall_time,
            "throughput": self.throughput,
            "outcome": self.outcome,
        }


class LocalCache:
    """Small worker-local open-addressing set of packed states.

    Deduplicates successors between flushes to the shared table.  When a
    probe window is full the entry at the home slot is forwarded to the
    shared table immediately and the new state takes its place, so nothing
    is ever dropped.
    """

    _PROBES = 8

    def __init__(self, table: StateTable, slots: int):
        self._table = table
        self._slots = slots
        self._entries = [None] * slots
        self.hits = 0
        self.lookups = 0

    def insert(self, p) -> bool:
        """True when ``p`` is fresh (first sight since the last flush)."""
        self.lookups += 1
        entries = self._entries
        nslots = self._slots
        home = hash(p) % nslots
        idx = home
        for _ in range(min(self._PROBES, nslots)):
            e = entries[idx]
            if e is None:
                entries[idx] = p
                return True
            if e == p:
                self.hits += 1
                return False
            idx = (idx + 1) % nslots
        self._forward(entries[home])
        entries[home] = p
        return True

    def _forward(self, p):
        code, _ = self._table.find_or_insert(p)
        if code == TABLE_FULL:
            raise TableFullError("state table full while forwarding cache entry")

    def flush(self):
        """Move every cached state to the shared table and clear."""
        entries = self._entries
        find_or_insert = self._table.find_or_insert
        for i, p in enumerate(entries):
            if p is not None:
                code, _ = find_or_insert(p)
                if code == TABLE_FULL:
                    entries[: i] = [None] * i
                    raise TableFullError("state table full while flushing cache")
                entries[i] = None


def worker_round(worker_id, partition, table, net, scheme, cache,
                 deadlock_sink=None, abort_check=None, handles=None):
    """Expand every new state this worker claims in its bucket range and
    flush the cache before returning (expanded, generated).

    ``handles`` lets the driver pass a scan snapshot taken at the global
    round start; by default the partition is scanned here.  Raises
    :class:`TableFullError` when the shared table fills; the exception
    carries the partial counts.
    """
    first, last = partition
    expanded = 0
    generated = 0
    claim = table.claim_new
    read = table.read_slot
    unpack = statevec.unpack
    pack = statevec.pack
    insert = cache.insert
    if handles is None:
        handles = table.scan_new(first, last)
    try:
        for h in handles:
            if abort_check is not None and abort_check():
                break
            if not claim(h):
                continue
            s = unpack(scheme, read(h))
            succs, count = expand(net, s)
            expanded += 1
            generated += count
            if not succs and deadlock_sink is not None:
                deadlock_sink(s)
            for _, t in succs:
                insert(pack(scheme, t))
        cache.flush()
    except TableFullError as err:
        err.expanded = expanded
        err.generated = generated
        raise
    return expanded, generated


class _Control:
    """Shared counters and the bounded deadlock buffer, in one anonymous
    mmap so forked workers see the same memory."""

    def __init__(self, workers: int, vector_length: int):
        counter_bytes = workers * 5 * 8
        flag_bytes = 5 * 8
        dl_bytes = DEADLOCK_KEEP * vector_length * 4
        self._mm = mmap.mmap(-1, counter_bytes + flag_bytes + dl_bytes)
        self.counters = np.frombuffer(
            self._mm, dtype=np.int64, count=workers * 5
        ).reshape(workers, 5)
        self.flags = np.frombuffer(
            self._mm, dtype=np.int64, count=5, offset=counter_bytes
        )
        self.deadlock_words = np.frombuffer(
            self._mm,
            dtype=np.uint32,
            count=DEADLOCK_KEEP * vector_length,
            offset=counter_bytes + flag_bytes,
        ).reshape(DEADLOCK_KEEP, vector_length)


def _worker_loop(worker_id, table, net, scheme, cfg, ctrl, dl_lock, barrier,
                 partition):
    counters = ctrl.counters
    flags = ctrl.flags
    vlen = scheme.vector_length
    cache = LocalCache(table, cfg.cache_slots)
    max_iterations = cfg.max_iterations

    def deadlock_sink(s):
        p = statevec.pack(scheme, s)
        with dl_lock:
            n = int(flags[_DL_COUNT])
            if n < DEADLOCK_KEEP:
                ctrl.deadlock_words[n, :vlen] = p
            flags[_DL_COUNT] = n + 1

    def abort_check():
        return flags[_ABORT] != 0

    sink = deadlock_sink if cfg.detect_deadlocks else None
    rounds = 0
    try:
        # Scans are snapshotted while no worker is expanding (between the
        # counter barrier and the decision barrier, and once before the
        # first round), so states published during a round are expanded no
        # earlier than the next round and the round count is
        # schedule-independent.
        handles = table.scan_new(*partition)
        barrier.wait(_BARRIER_TIMEOUT)
        while True:
            try:
                expanded, generated = worker_round(
                    worker_id, partition, table, net, scheme, cache,
                    deadlock_sink=sink, abort_check=abort_check, handles=handles,
                )
            except TableFullError as err:
                flags[_ABORT] = 1
                expanded = err.expanded
                generated = err.generated
            counters[worker_id, _CLAIMS] = expanded
            counters[worker_id, _EXPANDED] += expanded
            counters[worker_id, _GENERATED] += generated
            barrier.wait(_BARRIER_TIMEOUT)
            total_claims = int(counters[:, _CLAIMS].sum())
            rounds += 1
            capped = (
                max_iterations is not None
                and rounds >= max_iterations
                and total_claims != 0
                and not flags[_ABORT]
            )
            stop = total_claims == 0 or flags[_ABORT] or capped
            if capped and worker_id == 0:
                flags[_CAPPED] = 1
            if not stop:
                handles = table.scan_new(*partition)
            barrier.wait(_BARRIER_TIMEOUT)
            if stop:
                break
            counters[worker_id, _CLAIMS] = 0
        counters[worker_id, _CACHE_HITS] = cache.hits
        counters[worker_id, _CACHE_LOOKUPS] = cache.lookups
        if worker_id == 0:
            flags[_ROUNDS] = rounds
    except threading.BrokenBarrierError:
        pass
    except Exception:
        flags[_ERROR] = 1
        traceback.print_exc()
        barrier.abort()


def _partitions(num_buckets: int, workers: int) -> list:
    bounds = [num_buckets * w // workers for w in range(workers + 1)]
    return [(bounds[w], bounds[w + 1]) for w in range(workers)]


def _resolve_backend(cfg: ExploreConfig) -> str:
    backend = cfg.backend
    if backend == "auto":
        if cfg.workers > 1 and "fork" in multiprocessing.get_all_start_methods():
            return "processes"
        return "threads"
    if backend not in ("threads", "processes"):
        raise ValueError(f"unknown backend {backend!r}")
    return backend


def explore(net: Network, cfg: ExploreConfig, dump_states=None, dump_table=None):
    """Run the parallel reachability analysis and return its report.

    ``dump_states`` / ``dump_table`` take output paths written after the
    search from the final table (canonical sorted state dump, and a CSV of
    bucket, slot, status, hex words).
    """
    scheme = statevec.make_scheme(net)
    table = StateTable(cfg.table, scheme.vector_length)
    start = time.perf_counter()

    code, _ = table.find_or_insert(statevec.pack(scheme, net.initial))
    ctrl = _Control(cfg.workers, scheme.vector_length)
    if code == TABLE_FULL:
        ctrl.flags[_ABORT] = 1
        rounds = 0
    else:
        parts = _partitions(table.num_buckets, cfg.workers)
        backend = _resolve_backend(cfg)
        if cfg.workers == 1:
            barrier = threading.Barrier(1)
            dl_lock = threading.Lock()
            _worker_loop(0, table, net, scheme, cfg, ctrl, dl_lock, barrier, parts[0])
        elif backend == "threads":
            barrier = threading.Barrier(cfg.workers)
            dl_lock = threading.Lock()
            threads = [
                threading.Thread(
                    target=_worker_loop,
                    args=(w, table, net, scheme, cfg, ctrl, dl_lock, barrier, parts[w]),
                )
                for w in range(cfg.workers)
            ]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        else:
            ctx = multiprocessing.get_context("fork")
            barrier = ctx.Barrier(cfg.workers)
            dl_lock = ctx.Lock()
            procs = [
                ctx.Process(
                    target=_worker_loop,
                    args=(w, table, net, scheme, cfg, ctrl, dl_lock, barrier, parts[w]),
                )
                for w in range(cfg.workers)
            ]
            for p in procs:
                p.start()
            for p in procs:
                p.join()
        if ctrl.flags[_ERROR]:
            raise RuntimeError("a worker failed; see traceback above")
        rounds = int(ctrl.flags[_ROUNDS])

    wall = time.perf_counter() - start
    occupied, _, _ = table.occupancy()

    vlen = scheme.vector_length
    total_deadlocks = int(ctrl.flags[_DL_COUNT])
    kept = min(total_deadlocks, DEADLOCK_KEEP)
    deadlocks = tuple(
        sorted(
            statevec.unpack(scheme, tuple(int(w) for w in ctrl.deadlock_words[n, :vlen]))
            for n in range(kept)
        )
    )

    if ctrl.flags[_ABORT]:
        outcome = OUTCOME_TABLE_FULL
    elif ctrl.flags[_CAPPED]:
        outcome = ITERATION_CAP
    else:
        outcome = COMPLETE

    if dump_states is not None:
        with open(dump_states, "w", encoding="utf-8") as fh:
            fh.write(statevec.dump_states(table.occupied_vectors()))
    if dump_table is not None:
        with open(dump_table, "w", encoding="utf-8") as fh:
            fh.write("bucket,slot,status,words\n")
            for bucket, slot, status, words in table.dump_rows():
                fh.write(f"{bucket},{slot},{status},{statevec.format_packed(words)}\n")

    return ExplorationReport(
        states=occupied,
        transitions=int(ctrl.counters[:, _GENERATED].sum()),
        deadlocks=deadlocks,
        deadlocks_total=total_deadlocks,
        expanded=int(ctrl.counters[:, _EXPANDED].sum()),
        iterations=rounds,
        wall_time=wall,
        throughput=occupied / wall if wall > 0 else 0.0,
        outcome=outcome,
    )
