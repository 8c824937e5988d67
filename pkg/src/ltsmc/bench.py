"""Benchmark harness: isolated hash-table insertion runs, bucket-size
sweeps over real models, and the two scalable model generators.

The insertion benchmark replays state-space exploration traffic in
isolation: a sequence of random vectors in which every unique element
occurs ``duplication`` times, shuffled, split across threads and pushed
through ``find_or_insert``.  High duplication mimics models with high
fan-in, where most table operations are lookups of already-present states.
"""

from __future__ import annotations

import csv
import statistics
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .explore import ExploreConfig, explore
from .hashtable import (
    DEFAULT_SEED,
    TABLE_FULL,
    StateTable,
    TableConfig,
    slots_per_bucket,
)
from .network import Network, load_network

DUPLICATION_GRID = tuple([1] + list(range(10, 101, 10)))


@dataclass(frozen=True)
class DuplicationSpec:
    total: int = 1_000_000
    duplication: int = 1
    vector_length: int = 1
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.total < 1 or self.duplication < 1 or self.vector_length < 1:
            raise ValueError("total, duplication and vector_length must be >= 1")
        if self.duplication > self.total:
            raise ValueError("duplication exceeds sequence length")

    @property
    def unique_count(self) -> int:
        return self.total // self.duplication


@dataclass(frozen=True)
class BenchRecord:
    total: int
    duplication: int
    vector_length: int
    seed: int
    bucket_words: int
    threads: int
    wall_ms: float
    inserts_per_sec: float
    found_count: int
    inserted_count: int


def _unique_rows(spec: DuplicationSpec, rng) -> np.ndarray:
    """``unique_count`` distinct random vectors as a (unique, L) array."""
    unique = spec.unique_count
    rows = rng.integers(0, 1 << 32, size=(int(unique * 1.1) + 16, spec.vector_length),
                        dtype=np.uint64)
    rows = np.unique(rows, axis=0)
    while len(rows) < unique:
        extra = rng.integers(0, 1 << 32, size=(unique, spec.vector_length),
                             dtype=np.uint64)
        rows = np.unique(np.vstack([rows, extra]), axis=0)
    return rows[rng.permutation(len(rows))[:unique]]


def _sequence_arrays(spec: DuplicationSpec):
    """(unique_rows, shuffled positions); sequence[k] = rows[min(perm[k] //
    duplication, unique-1)], the min padding the last unique vector up to
    ``total``."""
    rng = np.random.default_rng(spec.seed)
    rows = _unique_rows(spec, rng)
    perm = rng.permutation(spec.total)
    return rows, perm


def gen_duplication_sequence(spec: DuplicationSpec) -> list:
    """``total // duplication`` distinct random vectors, each repeated
    ``duplication`` times (the last one padded to reach ``total``), globally
    shuffled.  Deterministic per seed."""
    rows, perm = _sequence_arrays(spec)
    picks = np.minimum(perm // spec.duplication, spec.unique_count - 1)
    return [tuple(int(w) for w in row) for row in rows[picks]]


def insert_bench_table_config(spec: DuplicationSpec, bucket_words: int = 32,
                              layout: str | None = None,
                              num_hash_functions: int = 8,
                              table_seed: int = DEFAULT_SEED) -> TableConfig:
    """Size a table so the worst-case load (duplication 1) stays <= 50%."""
    cfg = TableConfig(bucket_words=bucket_words, layout=layout,
                      num_hash_functions=num_hash_functions, seed=table_seed)
    spb = slots_per_bucket(bucket_words, spec.vector_length, cfg.resolved_layout())
    buckets = max(num_hash_functions, -(-2 * spec.total // spb))
    return TableConfig(
        bucket_words=bucket_words,
        num_hash_functions=num_hash_functions,
        capacity_words=buckets * bucket_words,
        layout=layout,
        seed=table_seed,
    )


_STREAM_CHUNK = 1 << 18


def run_insert_bench(spec: DuplicationSpec, table_cfg: TableConfig,
                     threads: int = 1, sequence: list | None = None) -> BenchRecord:
    """Insert the whole sequence into one shared table and time only the
    insertion work.

    The sequence is partitioned across ``threads`` workers; the reported
    wall time is the largest per-worker insertion time (sequence generation
    and chunk materialization are excluded).  Large sequences are streamed
    from their numpy form in chunks instead of being materialized as one
    Python list.  Verifies found + inserted == total afterwards.
    """
    table = StateTable(table_cfg, spec.vector_length)

    if sequence is not None:
        parts = [sequence[t::threads] for t in range(threads)]

        def chunks_for(tid):
            yield parts[tid]
    else:
        rows, perm = _sequence_arrays(spec)
        last = spec.unique_count - 1
        dup = spec.duplication

        def chunks_for(tid):
            idx = perm[tid::threads]
            for off in range(0, len(idx), _STREAM_CHUNK):
                picks = np.minimum(idx[off : off + _STREAM_CHUNK] // dup, last)
                yield rows[picks].tolist()

    inserted_counts = [0] * threads
    insert_times = [0.0] * threads
    errors = []
    start_gate = threading.Barrier(threads)

    def run(tid):
        find_or_insert = table.find_or_insert
        inserted = 0
        elapsed = 0.0
        try:
            start_gate.wait()
            for chunk in chunks_for(tid):
                t0 = time.perf_counter()
                for p in chunk:
                    code, _ = find_or_insert(p)
                    if code == TABLE_FULL:
                        raise RuntimeError(
                            "table full during benchmark; sizing precondition violated"
                        )
                    inserted += code  # INSERTED == 1, FOUND == 0
                elapsed += time.perf_counter() - t0
        except Exception as err:  # noqa: BLE001 - reported to the caller
            errors.append(err)
        inserted_counts[tid] = inserted
        insert_times[tid] = elapsed

    workers = [threading.Thread(target=run, args=(t,)) for t in range(threads)]
    for w in workers:
        w.start()
    for w in workers:
        w.join()
    if errors:
        raise errors[0]

    wall = max(insert_times)
    inserted = sum(inserted_counts)
    found = spec.total - inserted
    occupied, _, _ = table.occupancy()
    if inserted != occupied:
        raise RuntimeError(
            f"insert accounting mismatch: {inserted} inserts vs occupancy {occupied}"
        )
    return BenchRecord(
        total=spec.total,
        duplication=spec.duplication,
        vector_length=spec.vector_length,
        seed=spec.seed,
        bucket_words=table_cfg.bucket_words,
        threads=threads,
        wall_ms=wall * 1e3,
        inserts_per_sec=spec.total / wall if wall > 0 else 0.0,
        found_count=found,
        inserted_count=inserted,
    )


BENCH_CSV_COLUMNS = ("total", "duplication", "vector_length", "bucket_words",
                     "threads", "seed", "rep", "wall_ms", "inserts_per_sec",
                     "found", "inserted")


def duplication_grid(total: int = 1_000_000, duplications=DUPLICATION_GRID,
                     bucket_sizes=(4, 32), repetitions: int = 5, threads: int = 1,
                     vector_length: int = 1, seed: int = DEFAULT_SEED,
                     csv_path=None, progress=None) -> list:
    """The full duplication-by-bucket-size measurement grid.

    One sequence per duplication value (generation excluded from timing),
    ``repetitions`` timed runs per (duplication, bucket size) cell.
    """
    records = []
    for dup in duplications:
        spec = DuplicationSpec(total=total, duplication=dup,
                               vector_length=vector_length, seed=seed)
        sequence = gen_duplication_sequence(spec)
        for bucket_words in bucket_sizes:
            cfg = insert_bench_table_config(spec, bucket_words)
            for rep in range(repetitions):
                rec = run_insert_bench(spec, cfg, threads=threads, sequence=sequence)
                records.append((rep, rec))
                if progress is not None:
                    progress(rec)
    if csv_path is not None:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(BENCH_CSV_COLUMNS)
            for rep, r in records:
                writer.writerow([r.total, r.duplication, r.vector_length,
                                 r.bucket_words, r.threads, r.seed, rep,
                                 f"{r.wall_ms:.3f}", f"{r.inserts_per_sec:.1f}",
                                 r.found_count, r.inserted_count])
    return [r for _, r in records]


# --- model generators --------------------------------------------------------

def gen_token_ring(nodes: int, out_dir) -> tuple:
    """Write the token-ring model: N ring nodes passing one token forward.

    Each node has five states: two while holding the token and three idle
    states it wanders through while waiting.  Its five transitions are two
    communications (hand the token to the next node, take it from the
    previous one) and three internal steps.  Returns (aut paths, exp path).
    """
    if not 2 <= nodes <= 16:
        raise ValueError("token ring supports 2..16 nodes")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    # states: 0 holding, 1 ready-to-pass, 2 idle (receive point), 3, 4 idle
    def node_aut(initial):
        return (
            f"des ({initial}, 5, 5)\n"
            '(0, "i", 1)\n'
            '(1, "put", 2)\n'
            '(2, "i", 3)\n'
            '(3, "i", 4)\n'
            '(4, "get", 0)\n'
        )

    holder = out / "node_token.aut"
    idler = out / "node_idle.aut"
    holder.write_text(node_aut(0), encoding="utf-8")
    idler.write_text(node_aut(2), encoding="utf-8")

    rules = []
    for i in range(nodes):
        items = ["_"] * nodes
        items[i] = "put"
        items[(i + 1) % nodes] = "get"
        rules.append(" * ".join(items) + " -> pass")
    files = ['"node_token.aut"'] + ['"node_idle.aut"'] * (nodes - 1)
    exp = (
        "-- token ring with %d nodes: one token passed around the ring\n"
        "par using\n    %s\nin\n    %s\nend par\n"
        % (nodes, ",\n    ".join(rules), "\n    || ".join(files))
    )
    exp_path = out / "net.exp"
    exp_path.write_text(exp, encoding="utf-8")
    return [holder, idler], exp_path


def gen_gas_station(customers: int, out_dir) -> tuple:
    """Write the gas-station model: one operator, two pumps, N customers.

    A customer prepays the operator, the operator activates a free pump,
    the customer starts pumping at an activated pump and finishes, then
    collects change from the operator.  Pumps and customers are matched
    anonymously.  Returns (aut paths, exp path).
    """
    if not 2 <= customers <= 12:
        raise ValueError("gas station supports 2..12 customers")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    operator = (
        "des (0, 3, 2)\n"
        '(0, "pay", 1)\n'
        '(1, "activate", 0)\n'
        '(0, "change", 0)\n'
    )
    pump = (
        "des (0, 3, 3)\n"
        '(0, "activate", 1)\n'
        '(1, "start", 2)\n'
        '(2, "finish", 0)\n'
    )
    customer = (
        "des (0, 4, 4)\n"
        '(0, "pay", 1)\n'
        '(1, "start", 2)\n'
        '(2, "finish", 3)\n'
        '(3, "change", 0)\n'
    )
    paths = []
    for name, text in (("operator.aut", operator), ("pump.aut", pump),
                       ("customer.aut", customer)):
        p = Path(out) / name
        p.write_text(text, encoding="utf-8")
        paths.append(p)

    n = customers
    total = n + 3  # operator, two pumps, customers

    def rule(parts, result):
        items = ["_"] * total
        for idx, act in parts:
            items[idx] = act
        return " * ".join(items) + f" -> {result}"

    rules = []
    for c in range(n):
        rules.append(rule([(0, "pay"), (3 + c, "pay")], "pay"))
    for p in range(2):
        rules.append(rule([(0, "activate"), (1 + p, "activate")], "activate"))
    for c in range(n):
        for p in range(2):
            rules.append(rule([(1 + p, "start"), (3 + c, "start")], "start"))
            rules.append(rule([(1 + p, "finish"), (3 + c, "finish")], "finish"))
    for c in range(n):
        rules.append(rule([(0, "change"), (3 + c, "change")], "change"))

    files = ['"operator.aut"', '"pump.aut"', '"pump.aut"'] + ['"customer.aut"'] * n
    exp = (
        "-- gas station: one operator, two pumps, %d customers\n"
        "par using\n    %s\nin\n    %s\nend par\n"
        % (n, ",\n    ".join(rules), "\n    || ".join(files))
    )
    exp_path = Path(out) / "net.exp"
    exp_path.write_text(exp, encoding="utf-8")
    return paths, exp_path


# --- bucket-size sweep --------------------------------------------------------

SWEEP_CSV_COLUMNS = ("model", "bucket", "mean_ms", "normalized", "reps", "outcome")
BASELINE_BUCKET_WORDS = 32


@dataclass(frozen=True)
class SweepCell:
    model: str
    bucket_words: int
    mean_ms: float
    normalized: float
    repetitions: int
    outcome: str
    states: int
    transitions: int


def bucket_size_sweep(network, model_name: str = "model",
                      sizes=(4, 8, 16, 32), repetitions: int = 5,
                      explore_cfg: ExploreConfig | None = None,
                      csv_path=None) -> list:
    """Explore the model once per bucket size, ``repetitions`` times each,
    and report mean runtimes normalized to the 32-word baseline.

    ``network`` is a :class:`Network` or a path to a network file.  A
    TABLE_FULL outcome is recorded in the cell, not raised.
    """
    if not isinstance(network, Network):
        model_name = Path(network).stem if model_name == "model" else model_name
        network = load_network(network)
    base = explore_cfg if explore_cfg is not None else ExploreConfig()

    cells = []
    for bucket_words in sizes:
        table = TableConfig(
            bucket_words=bucket_words,
            num_hash_functions=base.table.num_hash_functions,
            capacity_words=base.table.capacity_words,
            layout=None,
            seed=base.table.seed,
        )
        cfg = ExploreConfig(
            workers=base.workers, table=table, cache_slots=base.cache_slots,
            detect_deadlocks=base.detect_deadlocks,
            max_iterations=base.max_iterations, backend=base.backend,
        )
        times = []
        outcome = "COMPLETE"
        states = transitions = 0
        for _ in range(repetitions):
            report = explore(network, cfg)
            times.append(report.wall_time * 1e3)
            states, transitions = report.states, report.transitions
            if report.outcome != "COMPLETE":
                outcome = report.outcome
        cells.append([model_name, bucket_words, statistics.mean(times),
                      repetitions, outcome, states, transitions])

    baseline = next(
        (c[2] for c in cells if c[1] == BASELINE_BUCKET_WORDS and c[4] == "COMPLETE"),
        None,
    )
    results = []
    for model, bucket_words, mean_ms, reps, outcome, states, transitions in cells:
        normalized = mean_ms / baseline if baseline else float("nan")
        results.append(SweepCell(model, bucket_words, mean_ms, normalized,
                                 reps, outcome, states, transitions))

    if csv_path is not None:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(SWEEP_CSV_COLUMNS)
            for c in results:
                writer.writerow([c.model, c.bucket_words, f"{c.mean_ms:.3f}",
                                 f"{c.normalized:.4f}", c.repetitions, c.outcome])
    return results
