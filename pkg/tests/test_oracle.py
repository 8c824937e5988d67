from ltsmc.aut import parse_aut, parse_network
from ltsmc.explore import ExploreConfig, explore
from ltsmc.hashtable import TableConfig
from ltsmc.network import build_network
from ltsmc.oracle import sequential_bfs

from conftest import ring_network


def test_fig_counts(fig_net):
    result = sequential_bfs(fig_net)
    assert result.states == 8
    assert result.transitions == 24
    assert result.deadlocks == ()
    assert len(result.state_set) == 8


def test_zero_rule_single_process_is_reachable_sublts():
    # state 3 unreachable from 0
    lts = parse_aut('des (0,3,4)\n(0,"a",1)\n(1,"b",2)\n(2,"c",0)\n')
    net = build_network(parse_network('par using in "x.aut" end par'), [lts])
    result = sequential_bfs(net)
    assert result.states == 3
    assert result.state_set == ((0,), (1,), (2,))


def test_ring4_equals_explore(model_dir):
    net = ring_network(4, model_dir)
    expected = sequential_bfs(net, keep_states=False)
    report = explore(
        net,
        ExploreConfig(workers=2, table=TableConfig(capacity_words=1 << 14),
                      backend="threads"),
    )
    assert (report.states, report.transitions) == \
        (expected.states, expected.transitions)


def test_self_consistent_across_runs(model_dir):
    net = ring_network(3, model_dir)
    a = sequential_bfs(net)
    b = sequential_bfs(net)
    assert a.states == b.states
    assert a.transitions == b.transitions
    assert a.state_set == b.state_set
    assert a.deadlocks == b.deadlocks


def test_deadlocks_sorted():
    lts = parse_aut('des (0,2,3)\n(0,"a",2)\n(0,"b",1)')
    net = build_network(parse_network('par using in "x.aut" end par'), [lts])
    result = sequential_bfs(net)
    assert result.deadlocks == ((1,), (2,))


def test_max_states_guard(model_dir):
    net = ring_network(5, model_dir)
    try:
        sequential_bfs(net, max_states=10)
    except RuntimeError as err:
        assert "max_states" in str(err)
    else:
        raise AssertionError("expected RuntimeError")
