import warnings
from collections import deque

import pytest

from ltsmc.aut import Lts, parse_aut, parse_network
from ltsmc.network import (
    NetworkError,
    build_network,
    expand,
    is_deadlock,
    load_network,
    successors,
)

from conftest import FIG_NET


def bfs_counts(net):
    seen = {net.initial}
    queue = deque([net.initial])
    transitions = 0
    while queue:
        s = queue.popleft()
        succs, count = expand(net, s)
        transitions += count
        for _, t in succs:
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return len(seen), transitions


@pytest.fixture(scope="module")
def fig(fig_net):
    return fig_net


def label_names(net, i):
    return sorted(net.processes[i].labels[l] for l in net.independent[i])


class TestBuildNetwork:
    def test_fig_independent_sets(self, fig):
        assert label_names(fig, 0) == ["gen_work"]
        assert label_names(fig, 1) == ["i", "work"]
        assert label_names(fig, 2) == ["i", "work"]

    def test_single_process_no_rules_all_independent(self):
        lts = parse_aut('des (0,2,2)\n(0,"a",1)\n(1,"b",0)')
        net = build_network(parse_network('par using in "x.aut" end par'), [lts])
        assert label_names(net, 0) == ["a", "b"]

    def test_rule_with_unknown_action_never_fires(self):
        lts = parse_aut('des (0,2,2)\n(0,"a",1)\n(1,"b",0)')
        desc = parse_network('par using ack * ack -> ack in "x.aut" || "y.aut" end par')
        net = build_network(desc, [lts, lts])
        seen = {net.initial}
        queue = deque([net.initial])
        actions = set()
        while queue:
            s = queue.popleft()
            for a, t in successors(net, s):
                actions.add(net.actions[a])
                if t not in seen:
                    seen.add(t)
                    queue.append(t)
        assert "ack" not in actions
        assert actions == {"a", "b"}

    def test_process_count_mismatch(self):
        lts = parse_aut('des (0,1,2)\n(0,"a",1)')
        desc = parse_network('par using in "x.aut" || "y.aut" end par')
        with pytest.raises(NetworkError):
            build_network(desc, [lts])

    def test_internal_action_cannot_synchronize(self):
        lts = parse_aut('des (0,1,2)\n(0,"i",1)')
        desc = parse_network('par using i * i -> x in "x.aut" || "y.aut" end par')
        with pytest.raises(NetworkError, match="internal"):
            build_network(desc, [lts, lts])

    def test_single_participant_rule_warns(self):
        lts = parse_aut('des (0,1,2)\n(0,"a",1)')
        desc = parse_network('par using a * _ -> b in "x.aut" || "y.aut" end par')
        with pytest.warns(UserWarning, match="single participant"):
            build_network(desc, [lts, lts])


class TestSuccessors:
    def test_initial_state(self, fig):
        succs = successors(fig, (0, 0, 0))
        assert [(fig.actions[a], t) for a, t in succs] == [("gen_work", (1, 0, 0))]

    def test_both_consumers_busy(self, fig):
        succs = successors(fig, (1, 1, 1))
        named = {(fig.actions[a], t) for a, t in succs}
        assert named == {
            ("work", (1, 1, 1)),
            ("i", (1, 0, 1)),
            ("i", (1, 1, 0)),
        }

    def test_no_outgoing_transitions(self):
        lts = parse_aut('des (0,1,2)\n(0,"a",1)')
        net = build_network(parse_network('par using in "x.aut" end par'), [lts])
        assert successors(net, (1,)) == []
        assert is_deadlock(net, (1,))
        assert not is_deadlock(net, (0,))

    def test_pure_and_deterministic(self, fig):
        for s in [(0, 0, 0), (1, 1, 1), (1, 0, 1)]:
            assert successors(fig, s) == successors(fig, s)

    def test_self_loop_preserved(self, fig):
        # the consumers' work self-loop appears as a product self-loop
        succs = successors(fig, (0, 1, 0))
        assert any(t == (0, 1, 0) for _, t in succs)

    def test_zero_rule_outdegree_law(self):
        # disjoint alphabets: no (action, state) collisions across processes
        a = parse_aut('des (0,3,3)\n(0,"a",1)\n(0,"b",2)\n(1,"c",0)')
        b = parse_aut('des (0,2,2)\n(0,"x",1)\n(1,"y",0)')
        net = build_network(
            parse_network('par using in "a.aut" || "b.aut" end par'), [a, b]
        )
        for s in [(0, 0), (0, 1), (1, 0), (2, 1)]:
            out_a = sum(1 for src, _, _ in a.transitions if src == s[0])
            out_b = sum(1 for src, _, _ in b.transitions if src == s[1])
            assert len(successors(net, s)) == out_a + out_b


class TestFigCounts:
    def test_reachable_product(self, fig):
        states, transitions = bfs_counts(fig)
        assert states == 8
        assert transitions == 24

    def test_every_reachable_state_live(self, fig):
        seen = {fig.initial}
        queue = deque([fig.initial])
        while queue:
            s = queue.popleft()
            assert not is_deadlock(fig, s)
            for _, t in successors(fig, s):
                if t not in seen:
                    seen.add(t)
                    queue.append(t)


def test_load_network_resolves_relative_paths(tmp_path):
    (tmp_path / "x.aut").write_text('des (0,1,2)\n(0,"a",1)')
    (tmp_path / "net.exp").write_text('par using in "x.aut" end par')
    net = load_network(tmp_path / "net.exp")
    assert net.processes[0].num_states == 2


def test_load_bundled_fig_model():
    net = load_network(FIG_NET)
    assert bfs_counts(net) == (8, 24)
