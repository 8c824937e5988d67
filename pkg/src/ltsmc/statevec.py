"""Bit-packing of composite states into fixed-length vectors of 32-bit
words, the unit stored in the hash table.

Each process gets a field of ``max(1, ceil(log2(num_states)))`` bits.
Fields are laid out process 0 first from the low end of word 0; a field
that would straddle a 32-bit boundary moves entirely to the next word, so
unpacking never has to stitch bits across words.  Unused padding bits are
always zero, and the all-zero vector is a valid encoding (slot emptiness in
the hash table is tracked out of band).
"""

from __future__ import annotations

from dataclasses import dataclass

from .network import CompositeState, Network

WORD_BITS = 32
MAX_VECTOR_WORDS = 16


class PackingError(ValueError):
    pass


@dataclass(frozen=True)
class PackingScheme:
    widths: tuple[int, ...]
    num_states: tuple[int, ...]
    word_index: tuple[int, ...]
    shift: tuple[int, ...]
    total_bits: int
    vector_length: int


def make_scheme(net: Network) -> PackingScheme:
    """Derive the packing layout from the network's per-process state counts."""
    return scheme_for_sizes([p.num_states for p in net.processes])


def scheme_for_sizes(sizes) -> PackingScheme:
    widths = tuple(max(1, (n - 1).bit_length()) for n in sizes)
    word_index = []
    shift = []
    word = 0
    used = 0
    for w in widths:
        if used + w > WORD_BITS:
            word += 1
            used = 0
        word_index.append(word)
        shift.append(used)
        used += w
    vector_length = word + 1
    if vector_length > MAX_VECTOR_WORDS:
        raise PackingError(
            f"state vector too wide: {vector_length} words exceeds {MAX_VECTOR_WORDS}"
        )
    return PackingScheme(
        widths=widths,
        num_states=tuple(sizes),
        word_index=tuple(word_index),
        shift=tuple(shift),
        total_bits=sum(widths),
        vector_length=vector_length,
    )


def pack(scheme: PackingScheme, s: CompositeState) -> tuple:
    """Pack a composite state into a tuple of ``vector_length`` words."""
    words = [0] * scheme.vector_length
    word_index = scheme.word_index
    shift = scheme.shift
    for i, local in enumerate(s):
        words[word_index[i]] |= local << shift[i]
    return tuple(words)


def unpack(scheme: PackingScheme, p) -> CompositeState:
    """Exact inverse of :func:`pack`; rejects out-of-range field values."""
    out = []
    num_states = scheme.num_states
    for i, w in enumerate(scheme.widths):
        local = (p[scheme.word_index[i]] >> scheme.shift[i]) & ((1 << w) - 1)
        if local >= num_states[i]:
            raise PackingError(
                f"corrupt packed state: field {i} decodes to {local} >= {num_states[i]}"
            )
        out.append(local)
    return tuple(out)


def format_packed(p) -> str:
    """Render one packed state as space-separated lowercase hex words."""
    return " ".join(f"{w:08x}" for w in p)


def dump_states(packed_states) -> str:
    """Canonical dump: one state per line, lexicographically sorted."""
    return "\n".join(format_packed(p) for p in sorted(packed_states)) + "\n"
