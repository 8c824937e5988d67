import pytest

from ltsmc import statevec
from ltsmc.aut import parse_aut, parse_network
from ltsmc.explore import (
    ExploreConfig,
    LocalCache,
    explore,
    worker_round,
)
from ltsmc.hashtable import StateTable, TableConfig, TableFullError
from ltsmc.network import build_network, expand
from ltsmc.oracle import sequential_bfs

from conftest import gas_network, ring_network

SMALL_TABLE = TableConfig(capacity_words=1 << 14)


def run(net, workers=1, bucket_words=32, backend="threads", **kw):
    cfg = ExploreConfig(
        workers=workers,
        table=TableConfig(bucket_words=bucket_words, capacity_words=1 << 16),
        backend=backend,
        **kw,
    )
    return explore(net, cfg)


class TestFig:
    @pytest.mark.parametrize("workers", [1, 2, 4, 8])
    @pytest.mark.parametrize("bucket_words", [4, 8, 16, 32])
    def test_all_configs(self, fig_net, workers, bucket_words):
        report = run(fig_net, workers=workers, bucket_words=bucket_words,
                     detect_deadlocks=True)
        assert report.states == 8
        assert report.transitions == 24
        assert report.deadlocks == ()
        assert report.outcome == "COMPLETE"

    def test_exactly_once_expansion(self, fig_net):
        report = run(fig_net, workers=4)
        assert report.expanded == report.states

    def test_throughput_definition(self, fig_net):
        report = run(fig_net)
        assert report.throughput == pytest.approx(report.states / report.wall_time)


class TestDeadlocks:
    def test_sink_reported(self):
        lts = parse_aut('des (0,2,3)\n(0,"a",1)\n(0,"b",2)')
        net = build_network(parse_network('par using in "x.aut" end par'), [lts])
        report = run(net, detect_deadlocks=True)
        assert report.states == 3
        assert report.deadlocks == ((1,), (2,))
        assert report.deadlocks_total == 2

    def test_detection_off_by_default(self):
        lts = parse_aut('des (0,1,2)\n(0,"a",1)')
        net = build_network(parse_network('par using in "x.aut" end par'), [lts])
        report = run(net)
        assert report.deadlocks == ()
        assert report.deadlocks_total == 0

    def test_gas_station_deadlock_free(self, model_dir):
        net = gas_network(3, model_dir)
        report = run(net, workers=2, detect_deadlocks=True)
        assert report.deadlocks_total == 0


class TestOracleEquivalence:
    @pytest.mark.parametrize("workers", [1, 2, 4])
    @pytest.mark.parametrize("bucket_words", [4, 32])
    def test_small_models(self, model_dir, workers, bucket_words):
        for net in (ring_network(3, model_dir), gas_network(2, model_dir)):
            expected = sequential_bfs(net, keep_states=False)
            report = run(net, workers=workers, bucket_words=bucket_words,
                         detect_deadlocks=True)
            assert report.states == expected.states
            assert report.transitions == expected.transitions
            assert report.deadlocks == expected.deadlocks
            assert report.outcome == "COMPLETE"

    def test_state_set_equals_oracle(self, model_dir, tmp_path):
        net = ring_network(4, model_dir)
        expected = sequential_bfs(net)
        dump = tmp_path / "states.txt"
        report = run(net, workers=2, bucket_words=8)
        cfg = ExploreConfig(workers=2, table=SMALL_TABLE, backend="threads")
        explore(net, cfg, dump_states=dump)
        scheme = statevec.make_scheme(net)
        oracle_dump = statevec.dump_states(
            statevec.pack(scheme, s) for s in expected.state_set
        )
        assert dump.read_text() == oracle_dump
        assert report.states == expected.states

    def test_duplicate_free_across_partitions(self, model_dir, tmp_path):
        net = ring_network(4, model_dir)
        dump = tmp_path / "states.txt"
        cfg = ExploreConfig(workers=4, table=SMALL_TABLE, backend="threads")
        explore(net, cfg, dump_states=dump)
        lines = dump.read_text().splitlines()
        assert len(lines) == len(set(lines)) == 216


class TestBackends:
    def test_processes_match_threads(self, model_dir):
        net = ring_network(4, model_dir)
        a = run(net, workers=4, backend="threads", detect_deadlocks=True)
        b = run(net, workers=4, backend="processes", detect_deadlocks=True)
        assert (a.states, a.transitions, a.deadlocks) == \
            (b.states, b.transitions, b.deadlocks)

    def test_multiword_vectors_both_backends(self):
        # 33 two-state processes toggled by one big rule: a 2-state product
        # whose packed vector spans two words
        lts = parse_aut('des (0,2,2)\n(0,"t",1)\n(1,"t",0)')
        n = 33
        text = ("par using " + " * ".join(["t"] * n) + " -> sync in "
                + " || ".join(['"p.aut"'] * n) + " end par")
        net = build_network(parse_network(text), [lts] * n)
        assert statevec.make_scheme(net).vector_length == 2
        for backend in ("threads", "processes"):
            report = run(net, workers=2, backend=backend)
            assert (report.states, report.transitions) == (2, 2)
            assert report.outcome == "COMPLETE"


class TestOutcomes:
    def test_table_full(self, model_dir):
        net = ring_network(6, model_dir)  # 2916 states
        cfg = ExploreConfig(
            workers=2,
            table=TableConfig(bucket_words=4, capacity_words=4 * 64),
            backend="threads",
        )
        report = explore(net, cfg)
        assert report.outcome == "TABLE_FULL"
        assert 0 < report.states < 2916

    def test_iteration_cap(self, fig_net):
        cfg = ExploreConfig(workers=1, table=SMALL_TABLE, max_iterations=1)
        report = explore(fig_net, cfg)
        assert report.outcome == "ITERATION_CAP"
        assert report.iterations == 1
        assert report.states < 8

    def test_cap_not_reported_when_search_finishes_first(self, fig_net):
        cfg = ExploreConfig(workers=1, table=SMALL_TABLE, max_iterations=50)
        report = explore(fig_net, cfg)
        assert report.outcome == "COMPLETE"


class TestWorkerRound:
    def setup(self, net):
        scheme = statevec.make_scheme(net)
        table = StateTable(SMALL_TABLE, scheme.vector_length)
        return scheme, table

    def test_empty_partition(self, fig_net):
        scheme, table = self.setup(fig_net)
        cache = LocalCache(table, 64)
        result = worker_round(0, (0, table.num_buckets), table, fig_net,
                              scheme, cache)
        assert result == (0, 0)

    def test_single_worker_is_sequential_bfs(self, fig_net):
        scheme, table = self.setup(fig_net)
        cache = LocalCache(table, 64)
        table.find_or_insert(statevec.pack(scheme, fig_net.initial))
        total_expanded = 0
        total_generated = 0
        while True:
            expanded, generated = worker_round(
                0, (0, table.num_buckets), table, fig_net, scheme, cache
            )
            if not expanded:
                break
            total_expanded += expanded
            total_generated += generated
        assert total_expanded == 8
        assert total_generated == 24
        assert table.occupancy()[0] == 8


class TestLocalCache:
    def test_fresh_then_duplicate(self, fig_net):
        scheme, table = TestWorkerRound().setup(fig_net)
        cache = LocalCache(table, 64)
        assert cache.insert((3,)) is True
        assert cache.insert((3,)) is False
        cache.flush()
        assert cache.insert((3,)) is True

    def test_eviction_forwards_to_table(self, fig_net):
        scheme, table = TestWorkerRound().setup(fig_net)
        cache = LocalCache(table, 1)
        assert cache.insert((1,)) is True
        assert cache.insert((2,)) is True  # evicts (1,) into the table
        cache.flush()
        assert table.find_or_insert((1,))[0] == 0  # FOUND
        assert table.find_or_insert((2,))[0] == 0

    def test_flush_propagates_table_full(self):
        table = StateTable(
            TableConfig(bucket_words=4, capacity_words=4 * 8, num_hash_functions=4), 1
        )
        cache = LocalCache(table, 4096)
        for x in range(2000):
            cache.insert((x,))
        with pytest.raises(TableFullError):
            cache.flush()

    def test_cache_sees_duplicates_on_token_ring(self, model_dir):
        # replay a sequential exploration through one cache: with fan-in > 1
        # some successors must hit cache entries
        net = ring_network(8, model_dir)
        scheme = statevec.make_scheme(net)
        table = StateTable(TableConfig(bucket_words=8, capacity_words=8 << 14), 1)
        cache = LocalCache(table, 4096)
        pack = statevec.pack
        table.find_or_insert(pack(scheme, net.initial))
        while True:
            handles = table.scan_new(0, table.num_buckets)
            if not handles:
                break
            for h in handles:
                table.claim_new(h)
                s = statevec.unpack(scheme, table.read_slot(h))
                succs, _ = expand(net, s)
                for _, t in succs:
                    cache.insert(pack(scheme, t))
            cache.flush()
        assert table.occupancy()[0] == 34992
        assert cache.hits > 0
        miss_rate = 1 - cache.hits / cache.lookups
        assert miss_rate < 1.0
