"""Combiners applied to a table's entries on flush, compaction and scan.

Two flavours exist.  A :class:`Combiner` is key-local: it folds the values
written under one key and may run anywhere, including on buffer insert.  A
:class:`StreamCombiner` rewrites the ordered entry stream of one tablet and
can therefore look across keys; it only runs on compaction and scan.
"""

from __future__ import annotations

import operator
from itertools import compress, islice
from typing import Any, Iterable, Iterator, Sequence, Tuple

import numpy as np

Pair = Tuple[Tuple[bytes, bytes], bytes]

INT_WIDTH = 8


def encode_int(n: int) -> bytes:
    """Fixed-width big-endian unsigned encoding; byte order equals numeric order."""
    return n.to_bytes(INT_WIDTH, "big")


def decode_int(b: bytes) -> int:
    if len(b) != INT_WIDTH:
        raise ValueError(f"expected {INT_WIDTH}-byte integer value, got {len(b)} bytes")
    return int.from_bytes(b, "big")


class Combiner:
    """Key-local reduction.

    Values are lifted into a working state, merged pairwise (older first),
    and lowered back to bytes.  ``merge`` must be associative over whatever
    value multisets the table can actually receive.
    """

    def lift(self, value: bytes) -> Any:
        return value

    def merge(self, older: Any, newer: Any) -> Any:
        raise NotImplementedError

    def lower(self, state: Any) -> bytes:
        return state

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class LatestValue(Combiner):
    """Keep the newest write.  Used when a table declares no key-local combiner."""

    def merge(self, older: bytes, newer: bytes) -> bytes:
        return newer


class SummingCombiner(Combiner):
    """Sum 8-byte big-endian unsigned integers."""

    @staticmethod
    def lift(value: bytes) -> int:
        return int.from_bytes(value, "big")

    merge = staticmethod(operator.add)

    @staticmethod
    def lower(state: int) -> bytes:
        return state.to_bytes(INT_WIDTH, "big")

    @staticmethod
    def fold_groups(values: list, starts: list) -> list | None:
        """Sum each group of consecutive values; ``None`` if any value is not 8 bytes."""
        joined = b"".join(values)
        if len(joined) != INT_WIDTH * len(values):
            return None
        arr = np.frombuffer(joined, dtype=">u8")
        sums = np.add.reduceat(arr, np.asarray(starts, dtype=np.intp))
        uniq, inverse = np.unique(sums, return_inverse=True)
        encoded = [int(u).to_bytes(INT_WIDTH, "big") for u in uniq]
        return list(map(encoded.__getitem__, inverse.tolist()))


class StreamCombiner:
    """Key-spanning rewrite of one tablet's sorted entry stream."""

    def apply(self, stream: Iterable[Pair]) -> Iterator[Pair]:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


def split_stack(stack: Sequence[object]) -> tuple[Combiner, tuple[StreamCombiner, ...]]:
    """Validate a combiner stack and return (key_local, key_spanning...)."""
    local: Combiner | None = None
    spanning = []
    for i, c in enumerate(stack):
        if isinstance(c, Combiner):
            if i != 0:
                raise ValueError("a key-local combiner must be first in the stack")
            local = c
        elif isinstance(c, StreamCombiner):
            spanning.append(c)
        else:
            raise TypeError(f"not a combiner: {c!r}")
    return (local if local is not None else LatestValue()), tuple(spanning)


def fold_equal_keys(stream: Iterable[Pair], local: Combiner) -> Iterator[Pair]:
    """Collapse adjacent entries sharing a key with ``local``.

    ``stream`` must be sorted by key with equal keys ordered oldest first.
    """
    lift, merge, lower = local.lift, local.merge, local.lower
    it = iter(stream)
    for first in it:
        break
    else:
        return
    cur_key, cur_val = first
    state = None
    for key, value in it:
        if key == cur_key:
            if state is None:
                state = lift(cur_val)
            state = merge(state, lift(value))
        else:
            yield (cur_key, cur_val if state is None else lower(state))
            cur_key, cur_val, state = key, value, None
    yield (cur_key, cur_val if state is None else lower(state))


def apply_spanning(stream: Iterable[Pair], spanning: Sequence[StreamCombiner]) -> Iterable[Pair]:
    for sc in spanning:
        stream = sc.apply(stream)
    return stream


class _Memo(dict):
    __slots__ = ("fn",)

    def __init__(self, fn):
        super().__init__()
        self.fn = fn

    def __missing__(self, arg):
        out = self[arg] = self.fn(arg)
        return out


_key = operator.itemgetter(0)
_value = operator.itemgetter(1)


def fold_sorted(pairs: list, local: Combiner) -> tuple[list, list]:
    """List version of :func:`fold_equal_keys` returning ``(keys, values)``.

    Equal neighbours are found with C-level comparisons; only keys that
    actually repeat go through the combiner.  Combiner states must be
    hashable.
    """
    keys = list(map(_key, pairs))
    values = list(map(_value, pairs))
    if len(keys) < 2:
        return keys, values
    same = np.fromiter(map(operator.eq, keys, islice(keys, 1, None)), dtype=bool, count=len(keys) - 1)
    if not same.any():
        return keys, values
    last = np.append(~same, True)
    keep = last.tolist()
    kept_keys = list(compress(keys, keep))
    fast = getattr(local, "fold_groups", None)
    if fast is not None:
        # a group starts right after the previous group's last element
        starts = np.flatnonzero(last[:-1]) + 1
        out = fast(values, np.concatenate(([0], starts)))
        if out is not None:
            return kept_keys, out
    lift, lower, merge = _Memo(local.lift), _Memo(local.lower), local.merge
    for i in np.flatnonzero(same).tolist():
        values[i + 1] = lower[merge(lift[values[i]], lift[values[i + 1]])]
    return kept_keys, list(compress(values, keep))
