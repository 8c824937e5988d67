"""Fixed-capacity, closed-hashing concurrent set of packed state vectors.

Storage is a flat array of 32-bit words divided into buckets of 4, 8, 16 or
32 words; each bucket holds a fixed number of vector slots.  A vector is
hashed to a bucket; if the bucket is full the next of ``num_hash_functions``
hash functions is tried, and when every candidate bucket is full the insert
reports table-full (a value, not a fault - the caller decides what to do).

Insertion is a two-phase claim/publish: a slot's status cell moves
EMPTY -> CLAIMED atomically, the data words are written, then the status is
published as OCCUPIED_NEW.  Readers that meet a CLAIMED slot spin briefly
and then yield until the claimant publishes.  Status cells only ever move
forward (EMPTY -> CLAIMED -> OCCUPIED_NEW -> OCCUPIED_OLD), which makes the
NEW/OLD flag double as the open/closed-set bookkeeping for search drivers.

The table lives in one anonymous shared ``mmap``, so forked worker
processes and threads operate on the same memory.  CPython exposes no
hardware compare-and-swap, so the two conditional transitions (claim and
new->old) are emulated with a small array of striped locks held for a few
word operations; every other access is plain loads and stores on the shared
buffer.  On this interpreter that preserves the algorithm's guarantees:
claims are won exactly once, publication is ordered after the data writes,
and waits on CLAIMED slots are bounded by the claimant's next step.
"""

from __future__ import annotations

import mmap
import multiprocessing
import time
from dataclasses import dataclass

import numpy as np

# slot status values (monotone)
EMPTY = 0
CLAIMED = 1
OCCUPIED_NEW = 2
OCCUPIED_OLD = 3

# find_or_insert result codes
FOUND = 0
INSERTED = 1
TABLE_FULL = 2

HALF_BUCKET = "half"
PLAIN = "plain"

BUCKET_WORD_CHOICES = (4, 8, 16, 32)
DEFAULT_SEED = 42
DEFAULT_CAPACITY_WORDS = 1 << 22  # 16 MiB of vector storage

_M64 = (1 << 64) - 1
_SPIN_LIMIT = 1024
_NUM_STRIPES = 256  # power of two

# Claim/publish locks, created once per process and shared by every table:
# semaphore creation is expensive, and cross-table stripe sharing only adds
# rare benign contention (each operation holds exactly one lock at a time).
# Forked workers inherit the array with the table that uses it.
_STRIPE_LOCKS = None


def _stripe_locks():
    global _STRIPE_LOCKS
    if _STRIPE_LOCKS is None:
        _STRIPE_LOCKS = tuple(multiprocessing.Lock() for _ in range(_NUM_STRIPES))
    return _STRIPE_LOCKS


class TableFullError(RuntimeError):
    """Raised by callers that treat a full table as unrecoverable."""


@dataclass(frozen=True)
class TableConfig:
    bucket_words: int = 32
    num_hash_functions: int = 8
    capacity_words: int = DEFAULT_CAPACITY_WORDS
    layout: str | None = None  # None selects half buckets at 32 words, else plain
    seed: int = DEFAULT_SEED

    def resolved_layout(self) -> str:
        if self.layout is not None:
            return self.layout
        return HALF_BUCKET if self.bucket_words == 32 else PLAIN


def slots_per_bucket(bucket_words: int, vector_length: int, layout: str) -> int:
    """Number of vector slots a bucket holds.

    Half buckets split the bucket in two and pack each half separately:
    ``2 * floor((bucket_words/2) / vector_length)``.  The plain layout packs
    the whole bucket: ``floor(bucket_words / vector_length)``.
    """
    if bucket_words <= 0 or vector_length <= 0:
        raise ValueError("bucket_words and vector_length must be positive")
    if layout == HALF_BUCKET:
        if bucket_words % 2:
            raise ValueError("half-bucket layout requires an even bucket size")
        count = 2 * ((bucket_words // 2) // vector_length)
    elif layout == PLAIN:
        count = bucket_words // vector_length
    else:
        raise ValueError(f"unknown layout {layout!r}")
    if count == 0:
        raise ValueError(
            f"vector too long for bucket: {vector_length} words in a "
            f"{bucket_words}-word bucket ({layout})"
        )
    return count


def _splitmix64(x: int):
    while True:
        x = (x + 0x9E3779B97F4A7C15) & _M64
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
        yield z ^ (z >> 31)


def hash_constants(seed: int, count: int) -> tuple:
    """Deterministic (a_i, b_i) multiplier/offset pairs; a_i forced odd."""
    gen = _splitmix64(seed & _M64)
    return tuple((next(gen) | 1, next(gen)) for _ in range(count))


class StateTable:
    """Shared-memory concurrent set of fixed-length word vectors.

    ``find_or_insert`` and ``claim_new`` are linearizable; ``scan_new``,
    ``occupancy`` and the dump helpers are weakly consistent snapshots that
    are exact on a quiescent table.
    """

    def __init__(self, config: TableConfig, vector_length: int):
        if config.bucket_words not in BUCKET_WORD_CHOICES:
            raise ValueError(
                f"bucket_words must be one of {BUCKET_WORD_CHOICES}, "
                f"got {config.bucket_words}"
            )
        if config.num_hash_functions < 1:
            raise ValueError("need at least one hash function")
        layout = config.resolved_layout()
        spb = slots_per_bucket(config.bucket_words, vector_length, layout)
        num_buckets = config.capacity_words // config.bucket_words
        if num_buckets < config.num_hash_functions:
            raise ValueError(
                f"capacity_words {config.capacity_words} gives {num_buckets} buckets, "
                f"fewer than {config.num_hash_functions} hash functions"
            )

        self.config = config
        self.layout = layout
        self.vector_length = vector_length
        self.num_buckets = num_buckets
        self.slots_per_bucket = spb
        self.total_slots = num_buckets * spb

        # Slot offsets (in words) inside a bucket.  Half buckets fill each
        # half independently, leaving any remainder words unused per half.
        half_slots = spb // 2
        half_words = config.bucket_words // 2
        if layout == HALF_BUCKET:
            self._slot_offsets = tuple(
                (j * vector_length) if j < half_slots
                else (half_words + (j - half_slots) * vector_length)
                for j in range(spb)
            )
        else:
            self._slot_offsets = tuple(j * vector_length for j in range(spb))

        # One status byte per slot; per-bucket block padded to 8 bytes so
        # neighbouring buckets do not share a status word.
        self._status_stride = (spb + 7) & ~7

        data_bytes = num_buckets * config.bucket_words * 4
        status_bytes = num_buckets * self._status_stride
        counter_bytes = _NUM_STRIPES * 8 * 2
        self._mm = mmap.mmap(-1, data_bytes + status_bytes + counter_bytes)

        self._data = memoryview(self._mm)[:data_bytes].cast("I")
        self._data_np = np.frombuffer(self._mm, dtype=np.uint32, count=data_bytes // 4)
        self._status = memoryview(self._mm)[data_bytes : data_bytes + status_bytes].cast("B")
        self._status_np = np.frombuffer(
            self._mm, dtype=np.uint8, count=status_bytes, offset=data_bytes
        ).reshape(num_buckets, self._status_stride)
        self._occupied_counts = np.frombuffer(
            self._mm, dtype=np.int64, count=_NUM_STRIPES, offset=data_bytes + status_bytes
        )
        self._old_counts = np.frombuffer(
            self._mm,
            dtype=np.int64,
            count=_NUM_STRIPES,
            offset=data_bytes + status_bytes + _NUM_STRIPES * 8,
        )

        self._locks = _stripe_locks()
        self.hash_constants = hash_constants(config.seed, config.num_hash_functions)
        self._fold_salt = next(_splitmix64((config.seed ^ 0xA5A5A5A5A5A5A5A5) & _M64))

    # --- hashing ---------------------------------------------------------

    def fold(self, p) -> int:
        """Mix all words of a vector into one 64-bit value."""
        h = self._fold_salt
        for w in p:
            h = ((h ^ w) * 0x9E3779B97F4A7C15) & _M64
            h ^= h >> 29
        return h

    def bucket_index(self, p, i: int) -> int:
        """Bucket probed by hash function ``i`` for vector ``p``."""
        assert 0 <= i < self.config.num_hash_functions, "hash function index out of range"
        a, b = self.hash_constants[i]
        return ((a * self.fold(p) + b) & _M64) % self.num_buckets

    def probe_sequence(self, p) -> list:
        return [self.bucket_index(p, i) for i in range(self.config.num_hash_functions)]

    # --- core operations --------------------------------------------------

    def find_or_insert(self, p) -> tuple:
        """Return ``(FOUND, handle)``, ``(INSERTED, handle)`` or
        ``(TABLE_FULL, -1)``.

        Concurrent calls with equal vectors agree on one handle and exactly
        one caller observes INSERTED.  Occupied slots always form a prefix
        of each bucket, so the scan stops at the first EMPTY slot; a lost
        claim re-judges the same slot against the winner's published value.
        """
        status = self._status
        data = self._data
        locks = self._locks
        occupied_counts = self._occupied_counts
        spb = self.slots_per_bucket
        stride = self._status_stride
        vlen = self.vector_length
        offsets = self._slot_offsets
        bucket_words = self.config.bucket_words
        w0 = p[0]

        h = self.fold(p)
        for a, b in self.hash_constants:
            bucket = ((a * h + b) & _M64) % self.num_buckets
            sbase = bucket * stride
            dbase = bucket * bucket_words
            j = 0
            while j < spb:
                si = sbase + j
                st = status[si]
                if st == EMPTY:
                    handle = bucket * spb + j
                    lock = locks[handle & (_NUM_STRIPES - 1)]
                    lock.acquire()
                    if status[si] == EMPTY:
                        status[si] = CLAIMED
                        lock.release()
                        off = dbase + offsets[j]
                        for t in range(vlen):
                            data[off + t] = p[t]
                        lock.acquire()
                        status[si] = OCCUPIED_NEW
                        occupied_counts[handle & (_NUM_STRIPES - 1)] += 1
                        lock.release()
                        return INSERTED, handle
                    lock.release()
                    st = status[si]
                if st == CLAIMED:
                    st = self._wait_published(si)
                off = dbase + offsets[j]
                if data[off] == w0:
                    for t in range(1, vlen):
                        if data[off + t] != p[t]:
                            break
                    else:
                        return FOUND, bucket * spb + j
                j += 1
        return TABLE_FULL, -1

    def _wait_published(self, si: int) -> int:
        """Spin, then yield, until the claimant of status cell ``si``
        publishes.  Returns the post-publication status."""
        status = self._status
        for _ in range(_SPIN_LIMIT):
            st = status[si]
            if st != CLAIMED:
                return st
        while True:
            time.sleep(0)
            st = status[si]
            if st != CLAIMED:
                return st

    def claim_new(self, handle: int) -> bool:
        """Atomically move a slot OCCUPIED_NEW -> OCCUPIED_OLD.

        True iff this caller performed the transition; any number of racing
        callers see exactly one True.
        """
        bucket, j = divmod(handle, self.slots_per_bucket)
        si = bucket * self._status_stride + j
        stripe = handle & (_NUM_STRIPES - 1)
        lock = self._locks[stripe]
        lock.acquire()
        if self._status[si] == OCCUPIED_NEW:
            self._status[si] = OCCUPIED_OLD
            self._old_counts[stripe] += 1
            lock.release()
            return True
        lock.release()
        return False

    def scan_new(self, first_bucket: int, last_bucket: int) -> list:
        """Handles of slots observed OCCUPIED_NEW in ``[first, last)``,
        bucket-major.  A concurrent ``claim_new`` may take any of them; use
        ``claim_new`` for exclusivity."""
        spb = self.slots_per_bucket
        block = self._status_np[first_bucket:last_bucket, :spb]
        rows, cols = np.nonzero(block == OCCUPIED_NEW)
        if first_bucket:
            rows = rows + first_bucket
        return (rows.astype(np.int64) * spb + cols).tolist()

    def occupancy(self) -> tuple:
        """(occupied, new, load_factor); exact when quiescent."""
        occupied = int(self._occupied_counts.sum())
        old = int(self._old_counts.sum())
        load = occupied / self.total_slots if self.total_slots else 0.0
        return occupied, occupied - old, load

    # --- inspection --------------------------------------------------------

    def slot_status(self, handle: int) -> int:
        bucket, j = divmod(handle, self.slots_per_bucket)
        return self._status[bucket * self._status_stride + j]

    def read_slot(self, handle: int) -> tuple:
        bucket, j = divmod(handle, self.slots_per_bucket)
        off = bucket * self.config.bucket_words + self._slot_offsets[j]
        return tuple(self._data[off : off + self.vector_length])

    def occupied_vectors(self) -> list:
        """All published vectors (snapshot)."""
        spb = self.slots_per_bucket
        rows, cols = np.nonzero(self._status_np[:, :spb] >= OCCUPIED_NEW)
        offsets = (rows.astype(np.int64) * self.config.bucket_words
                   + np.asarray(self._slot_offsets, dtype=np.int64)[cols])
        vlen = self.vector_length
        if vlen == 1:
            return [(int(w),) for w in self._data_np[offsets]]
        gather = self._data_np[offsets[:, None] + np.arange(vlen)]
        return [tuple(int(w) for w in row) for row in gather]

    def dump_rows(self):
        """Yield (bucket, slot, status_name, words) for occupied slots."""
        names = {OCCUPIED_NEW: "NEW", OCCUPIED_OLD: "OLD"}
        spb = self.slots_per_bucket
        rows, cols = np.nonzero(self._status_np[:, :spb] >= OCCUPIED_NEW)
        for b, j in zip(rows, cols):
            b = int(b)
            j = int(j)
            handle = b * spb + j
            yield b, j, names[self.slot_status(handle)], self.read_slot(handle)
