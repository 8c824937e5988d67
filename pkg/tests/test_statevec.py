import random

import pytest
from hypothesis import given, strategies as st

from ltsmc import statevec
from ltsmc.statevec import (
    PackingError,
    dump_states,
    format_packed,
    make_scheme,
    pack,
    scheme_for_sizes,
    unpack,
)


class TestScheme:
    def test_fig_network(self, fig_net):
        scheme = make_scheme(fig_net)
        assert scheme.widths == (1, 1, 1)
        assert scheme.vector_length == 1

    def test_single_state_process_gets_one_bit(self):
        scheme = scheme_for_sizes([1])
        assert scheme.widths == (1,)
        assert scheme.vector_length == 1

    def test_three_4k_processes(self):
        scheme = scheme_for_sizes([1 << 12] * 3)
        assert scheme.widths == (12, 12, 12)
        assert scheme.total_bits == 36
        assert scheme.vector_length == 2

    def test_too_wide(self):
        with pytest.raises(PackingError, match="too wide"):
            scheme_for_sizes([1 << 20] * 30)

    def test_no_straddle(self):
        scheme = scheme_for_sizes([1 << 20, 1 << 20])
        assert scheme.widths == (20, 20)
        assert scheme.word_index == (0, 1)
        assert scheme.shift == (0, 0)
        assert scheme.vector_length == 2


class TestPackUnpack:
    def test_fig_examples(self, fig_net):
        scheme = make_scheme(fig_net)
        assert pack(scheme, (1, 0, 1)) == (0x5,)
        assert unpack(scheme, (0x5,)) == (1, 0, 1)

    def test_all_zero_state_is_all_zero_words(self):
        scheme = scheme_for_sizes([4, 4, 4])
        assert pack(scheme, (0, 0, 0)) == (0,)

    def test_corrupt_packed_state(self):
        scheme = scheme_for_sizes([3])  # width 2, but 3 is out of range
        with pytest.raises(PackingError, match="corrupt"):
            unpack(scheme, (3,))

    def test_roundtrip_fig_random(self, fig_net):
        scheme = make_scheme(fig_net)
        rng = random.Random(7)
        for _ in range(1000):
            s = tuple(rng.randrange(p.num_states) for p in fig_net.processes)
            assert unpack(scheme, pack(scheme, s)) == s

    def test_injective_on_full_small_product(self):
        scheme = scheme_for_sizes([3, 5, 2, 7])
        seen = {}
        for a in range(3):
            for b in range(5):
                for c in range(2):
                    for d in range(7):
                        s = (a, b, c, d)
                        p = pack(scheme, s)
                        assert p not in seen
                        seen[p] = s
                        assert unpack(scheme, p) == s

    def test_unused_high_bits_zero(self):
        scheme = scheme_for_sizes([2, 2])
        for s in ((0, 0), (1, 1), (0, 1)):
            (w,) = pack(scheme, s)
            assert w < 4


@st.composite
def scheme_and_state(draw):
    sizes = draw(st.lists(st.integers(1, 1 << 16), min_size=1, max_size=12))
    scheme = scheme_for_sizes(sizes)
    state = tuple(draw(st.integers(0, n - 1)) for n in sizes)
    return scheme, state


@given(scheme_and_state())
def test_roundtrip_property(case):
    scheme, state = case
    packed = pack(scheme, state)
    assert len(packed) == scheme.vector_length
    assert all(0 <= w < (1 << 32) for w in packed)
    assert unpack(scheme, packed) == state


class TestDumpFormat:
    def test_format_packed(self):
        assert format_packed((5, 0xDEADBEEF)) == "00000005 deadbeef"

    def test_dump_sorted_lexicographically(self):
        out = dump_states([(2, 0), (1, 5), (1, 4)])
        assert out == "00000001 00000004\n00000001 00000005\n00000002 00000000\n"

    def test_word_order_is_total(self):
        states = [(i, j) for i in range(4) for j in range(4)]
        lines = dump_states(states).splitlines()
        assert lines == sorted(lines)
