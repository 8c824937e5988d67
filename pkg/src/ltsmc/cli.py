"""Command-line entry point.

Subcommands: ``explore`` (parallel reachability over a network file, or the
sequential reference with ``--oracle``), ``bench-hash`` (isolated hash-table
insertion benchmark), ``sweep`` (bucket-size sweep over a model) and
``gen-model`` (write a generated model to a directory).

Every run prints its full effective configuration, seed included, before
any results.  Exit codes: 0 success, 1 input error, 2 table full, 3
internal assertion failure.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys
from pathlib import Path

from . import bench, statevec
from .aut import ParseError
from .explore import ExploreConfig, ExplorationReport, explore
from .hashtable import DEFAULT_SEED, TableConfig
from .network import NetworkError, load_network
from .oracle import sequential_bfs

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_TABLE_FULL = 2
EXIT_INTERNAL = 3

DEFAULT_TABLE_MB = 256.0


class _CliParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _parse_seed(value: str) -> int:
    if value == "random":
        return secrets.randbits(64)
    return int(value, 0)


def _table_words(table_mb: float) -> int:
    return int(table_mb * (1 << 20) / 4)


def build_parser() -> argparse.ArgumentParser:
    parser = _CliParser(prog="ltsmc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("explore", help="explore a network of LTSs")
    ex.add_argument("network", help="network description file")
    ex.add_argument("--workers", type=int, default=1)
    ex.add_argument("--bucket-size", type=int, choices=(4, 8, 16, 32), default=32)
    ex.add_argument("--hash-functions", type=int, default=8)
    ex.add_argument("--table-mb", type=float, default=DEFAULT_TABLE_MB)
    ex.add_argument("--layout", choices=("half", "plain"), default=None)
    ex.add_argument("--seed", type=_parse_seed, default=DEFAULT_SEED,
                    help="64-bit integer or 'random'")
    ex.add_argument("--deadlock", action="store_true", help="detect deadlocks")
    ex.add_argument("--json", action="store_true", dest="as_json")
    ex.add_argument("--dump-states", metavar="PATH")
    ex.add_argument("--dump-table", metavar="PATH")
    ex.add_argument("--oracle", action="store_true",
                    help="run the sequential reference instead")
    ex.add_argument("--backend", choices=("auto", "threads", "processes"),
                    default="auto")

    bh = sub.add_parser("bench-hash", help="isolated insertion benchmark")
    bh.add_argument("--total", type=int, default=1_000_000)
    bh.add_argument("--dup", type=int, default=None,
                    help="duplication factor; omit to run the full grid")
    bh.add_argument("--vector-len", type=int, default=1)
    bh.add_argument("--threads", type=int, default=1)
    bh.add_argument("--bucket-size", type=int, choices=(4, 8, 16, 32), default=32)
    bh.add_argument("--seed", type=_parse_seed, default=DEFAULT_SEED)
    bh.add_argument("--csv", metavar="PATH", default="hashtable_bench.csv")
    bh.add_argument("--reps", type=int, default=5)
    bh.add_argument("--paper-scale", action="store_true",
                    help="use the full 100,000,000-element sequences")

    sw = sub.add_parser("sweep", help="bucket-size sweep over one model")
    sw.add_argument("network")
    sw.add_argument("--reps", type=int, default=5)
    sw.add_argument("--csv", metavar="PATH", default="bucket_sweep.csv")
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("--table-mb", type=float, default=DEFAULT_TABLE_MB)
    sw.add_argument("--seed", type=_parse_seed, default=DEFAULT_SEED)
    sw.add_argument("--backend", choices=("auto", "threads", "processes"),
                    default="auto")

    gm = sub.add_parser("gen-model", help="write a generated model")
    gm.add_argument("kind", choices=("gas-station", "token-ring"))
    gm.add_argument("--n", type=int, required=True,
                    help="customers (gas-station) or nodes (token-ring)")
    gm.add_argument("--out", required=True, metavar="DIR")
    return parser


def _print_config(kind: str, cfg: dict, as_json: bool = False):
    if not as_json:
        pairs = " ".join(f"{k}={v}" for k, v in cfg.items())
        print(f"config[{kind}]: {pairs}")


def _report_lines(report: ExplorationReport) -> list:
    lines = [
        f"outcome:     {report.outcome}",
        f"states:      {report.states}",
        f"transitions: {report.transitions}",
        f"iterations:  {report.iterations}",
        f"wall_time:   {report.wall_time:.3f} s",
        f"throughput:  {report.throughput:.0f} states/sec",
    ]
    if report.deadlocks_total:
        lines.append(f"deadlocks:   {report.deadlocks_total} "
                     f"(showing {len(report.deadlocks)})")
        for s in report.deadlocks:
            lines.append(f"  {s}")
    else:
        lines.append("deadlocks:   0")
    return lines


def _cmd_explore(args) -> int:
    table_cfg = TableConfig(
        bucket_words=args.bucket_size,
        num_hash_functions=args.hash_functions,
        capacity_words=_table_words(args.table_mb),
        layout=args.layout,
        seed=args.seed,
    )
    config_echo = {
        "network": args.network,
        "mode": "oracle" if args.oracle else "parallel",
        "workers": args.workers,
        "bucket_words": table_cfg.bucket_words,
        "hash_functions": table_cfg.num_hash_functions,
        "table_mb": args.table_mb,
        "capacity_words": table_cfg.capacity_words,
        "layout": table_cfg.resolved_layout(),
        "seed": table_cfg.seed,
        "deadlock": args.deadlock,
        "backend": args.backend,
    }
    _print_config("explore", config_echo, args.as_json)
    net = load_network(args.network)

    if args.oracle:
        result = sequential_bfs(net)
        if args.as_json:
            doc = {
                "config": config_echo,
                "states": result.states,
                "transitions": result.transitions,
                "deadlocks": [list(s) for s in result.deadlocks],
                "deadlocks_total": len(result.deadlocks),
                "wall_time": result.wall_time,
                "throughput": result.throughput,
                "outcome": "COMPLETE",
            }
            print(json.dumps(doc, indent=2))
        else:
            print("outcome:     COMPLETE")
            print(f"states:      {result.states}")
            print(f"transitions: {result.transitions}")
            print(f"deadlocks:   {len(result.deadlocks)}")
            print(f"wall_time:   {result.wall_time:.3f} s")
            print(f"throughput:  {result.throughput:.0f} states/sec")
        if args.dump_states:
            scheme = statevec.make_scheme(net)
            packed = [statevec.pack(scheme, s) for s in result.state_set]
            Path(args.dump_states).write_text(
                statevec.dump_states(packed), encoding="utf-8"
            )
        return EXIT_OK

    cfg = ExploreConfig(
        workers=args.workers,
        table=table_cfg,
        detect_deadlocks=args.deadlock,
        backend=args.backend,
    )
    report = explore(net, cfg, dump_states=args.dump_states,
                     dump_table=args.dump_table)
    if args.as_json:
        doc = {"config": config_echo}
        doc.update(report.to_dict())
        print(json.dumps(doc, indent=2))
    else:
        for line in _report_lines(report):
            print(line)
    return EXIT_TABLE_FULL if report.outcome == "TABLE_FULL" else EXIT_OK


def _cmd_bench_hash(args) -> int:
    total = 100_000_000 if args.paper_scale else args.total
    dups = (args.dup,) if args.dup is not None else bench.DUPLICATION_GRID
    config_echo = {
        "total": total,
        "duplications": list(dups),
        "vector_len": args.vector_len,
        "threads": args.threads,
        "bucket_words": args.bucket_size,
        "seed": args.seed,
        "reps": args.reps,
        "csv": args.csv,
    }
    _print_config("bench-hash", config_echo)

    def progress(rec):
        print(f"  dup={rec.duplication:>4} bucket={rec.bucket_words:>2} "
              f"wall={rec.wall_ms:9.1f} ms  {rec.inserts_per_sec / 1e6:5.2f}M ops/s "
              f"found={rec.found_count} inserted={rec.inserted_count}")

    bench.duplication_grid(
        total=total,
        duplications=dups,
        bucket_sizes=(args.bucket_size,),
        repetitions=args.reps,
        threads=args.threads,
        vector_length=args.vector_len,
        seed=args.seed,
        csv_path=args.csv,
        progress=progress,
    )
    print(f"wrote {args.csv}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config_echo = {
        "network": args.network,
        "reps": args.reps,
        "workers": args.workers,
        "table_mb": args.table_mb,
        "seed": args.seed,
        "csv": args.csv,
        "backend": args.backend,
    }
    _print_config("sweep", config_echo)
    explore_cfg = ExploreConfig(
        workers=args.workers,
        table=TableConfig(capacity_words=_table_words(args.table_mb), seed=args.seed),
        backend=args.backend,
    )
    cells = bench.bucket_size_sweep(
        args.network, repetitions=args.reps, explore_cfg=explore_cfg,
        csv_path=args.csv,
    )
    print("model,bucket,mean_ms,normalized,reps,outcome")
    for c in cells:
        print(f"{c.model},{c.bucket_words},{c.mean_ms:.3f},"
              f"{c.normalized:.4f},{c.repetitions},{c.outcome}")
    print(f"wrote {args.csv}")
    return EXIT_OK


def _cmd_gen_model(args) -> int:
    _print_config("gen-model", {"kind": args.kind, "n": args.n, "out": args.out})
    if args.kind == "token-ring":
        auts, exp = bench.gen_token_ring(args.n, args.out)
    else:
        auts, exp = bench.gen_gas_station(args.n, args.out)
    for p in auts:
        print(f"wrote {p}")
    print(f"wrote {exp}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "explore":
            return _cmd_explore(args)
        if args.command == "bench-hash":
            return _cmd_bench_hash(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "gen-model":
            return _cmd_gen_model(args)
        raise AssertionError(f"unhandled command {args.command}")
    except _UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (ParseError, NetworkError, FileNotFoundError, IsADirectoryError,
            ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except AssertionError as err:
        print(f"internal assertion failure: {err}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
