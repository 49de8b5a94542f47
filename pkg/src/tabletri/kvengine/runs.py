"""Immutable sorted runs, held in memory or spilled to a temp file."""

from __future__ import annotations

import os
import struct
import tempfile
import weakref
from bisect import bisect_left, bisect_right
from itertools import islice
from typing import Iterable, Iterator, Optional

from .combiners import Pair

_HEADER = struct.Struct(">III")
_INDEX_EVERY = 256


class MemoryRun:
    """Parallel row / colq / value lists, sorted by (row, colq), no duplicate keys."""

    __slots__ = ("rows", "colqs", "values", "__weakref__")

    def __init__(self, rows: list, colqs: list, values: list):
        self.rows = rows
        self.colqs = colqs
        self.values = values

    def __len__(self) -> int:
        return len(self.rows)

    def _bounds(self, start: Optional[bytes], end: Optional[bytes]) -> tuple[int, int]:
        lo = 0 if start is None else bisect_left(self.rows, start)
        hi = len(self.rows) if end is None else bisect_right(self.rows, end)
        return lo, hi

    def iter_range(self, start: Optional[bytes] = None, end: Optional[bytes] = None) -> Iterator[Pair]:
        if start is None and end is None:
            return zip(zip(self.rows, self.colqs), self.values)
        lo, hi = self._bounds(start, end)
        return zip(
            zip(islice(self.rows, lo, hi), islice(self.colqs, lo, hi)),
            islice(self.values, lo, hi),
        )

    def count_range(self, start: Optional[bytes] = None, end: Optional[bytes] = None) -> int:
        lo, hi = self._bounds(start, end)
        return max(0, hi - lo)

    __iter__ = iter_range


class DiskRun:
    """A run stored as length-prefixed records with a sparse in-memory row index.

    The file is removed once the last reference to the run goes away, so
    cloned tables can keep sharing it safely.
    """

    __slots__ = ("path", "length", "_index_rows", "_index_offsets", "__weakref__")

    def __init__(self, path: str, length: int, index_rows: list, index_offsets: list):
        self.path = path
        self.length = length
        self._index_rows = index_rows
        self._index_offsets = index_offsets
        weakref.finalize(self, _unlink_quietly, path)

    def __len__(self) -> int:
        return self.length

    def iter_range(self, start: Optional[bytes] = None, end: Optional[bytes] = None) -> Iterator[Pair]:
        offset = 0
        if start is not None and self._index_rows:
            # blocks are indexed by their first row; a row may straddle blocks
            i = bisect_left(self._index_rows, start) - 1
            if i > 0:
                offset = self._index_offsets[i]
        with open(self.path, "rb") as f:
            f.seek(offset)
            read = f.read
            unpack = _HEADER.unpack
            while True:
                head = read(_HEADER.size)
                if not head:
                    return
                lr, lc, lv = unpack(head)
                row = read(lr)
                colq = read(lc)
                value = read(lv)
                if start is not None and row < start:
                    continue
                if end is not None and row > end:
                    return
                yield (row, colq), value

    def count_range(self, start: Optional[bytes] = None, end: Optional[bytes] = None) -> int:
        if start is None and end is None:
            return self.length
        return sum(1 for _ in self.iter_range(start, end))

    __iter__ = iter_range


Run = MemoryRun | DiskRun


def _unlink_quietly(path: str) -> None:
    try:
        os.unlink(path)
    except OSError:
        pass


def build_run(pairs: Iterable[Pair], spill_dir: Optional[str] = None) -> Optional[Run]:
    """Materialise a sorted, duplicate-free stream as a run; ``None`` if empty."""
    if spill_dir is None:
        rows: list = []
        colqs: list = []
        values: list = []
        ra, ca, va = rows.append, colqs.append, values.append
        for (row, colq), value in pairs:
            ra(row)
            ca(colq)
            va(value)
        if not rows:
            return None
        return MemoryRun(rows, colqs, values)

    os.makedirs(spill_dir, exist_ok=True)
    fd, path = tempfile.mkstemp(prefix="run-", suffix=".rf", dir=spill_dir)
    n = 0
    offset = 0
    index_rows: list = []
    index_offsets: list = []
    pack = _HEADER.pack
    with os.fdopen(fd, "wb") as f:
        for (row, colq), value in pairs:
            if n % _INDEX_EVERY == 0:
                index_rows.append(row)
                index_offsets.append(offset)
            rec = pack(len(row), len(colq), len(value)) + row + colq + value
            f.write(rec)
            offset += len(rec)
            n += 1
    if n == 0:
        _unlink_quietly(path)
        return None
    return DiskRun(path, n, index_rows, index_offsets)
