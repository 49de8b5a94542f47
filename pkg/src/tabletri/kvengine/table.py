"""Tablets, tables and the engine that owns them."""

from __future__ import annotations

import gc
import threading
from bisect import bisect_left
from contextlib import contextmanager
from itertools import chain
from operator import itemgetter
from typing import IO, Iterable, Iterator, NamedTuple, Optional, Sequence

from .combiners import (
    Combiner,
    Pair,
    StreamCombiner,
    apply_spanning,
    fold_sorted,
    split_stack,
)
from .runs import MemoryRun, Run, build_run
from .splits import SplitPoints

_first = itemgetter(0)
_second = itemgetter(1)


@contextmanager
def gc_paused():
    """Suspend the cyclic collector; it rescans millions of live key tuples otherwise."""
    was = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if was:
            gc.enable()


class Key(NamedTuple):
    row: bytes
    colq: bytes


class Entry(NamedTuple):
    key: Key
    value: bytes


class EngineError(Exception):
    pass


class TableExistsError(EngineError):
    pass


class TableNotFoundError(EngineError, KeyError):
    pass


class Tablet:
    """One contiguous row range of a table.

    ``buffer`` maps row -> {colq: combiner state}; states are folded on
    insert and only lowered to bytes on flush or scan.
    """

    def __init__(self, start: Optional[bytes], end: Optional[bytes]):
        # start is exclusive, end inclusive; None means unbounded
        self.start = start
        self.end = end
        self.buffer: dict[bytes, dict] = {}
        self.buffer_bytes = 0
        self.runs: list[Run] = []
        self.write_count = 0
        self.scan_count = 0
        self.lock = threading.Lock()

    @property
    def buffered_count(self) -> int:
        return sum(len(cols) for cols in self.buffer.values())

    @property
    def entry_count(self) -> int:
        return sum(len(r) for r in self.runs) + self.buffered_count

    def __repr__(self) -> str:
        return (f"Tablet(({self.start!r}, {self.end!r}], runs={len(self.runs)}, "
                f"buffered={self.buffered_count})")


class _Lowered(dict):
    """Memo of combiner states already encoded to bytes."""

    def __init__(self, lower):
        super().__init__()
        self._lower = lower

    def __missing__(self, state):
        v = self[state] = self._lower(state)
        return v


class Table:
    """A named, split-partitioned sorted key-value table.

    Entries are ``((row, colq), value)`` pairs; :class:`Entry` and
    :class:`Key` have the same shape and may be used interchangeably.
    Combiner states must be hashable and immutable: one lifted value may be
    shared by many keys.
    """

    def __init__(self, engine: "Engine", name: str, splits: SplitPoints,
                 combiners: Sequence[object] = ()):
        self.engine = engine
        self.name = name
        self.splits = splits
        self.combiners = tuple(combiners)
        self._local, self._spanning = split_stack(self.combiners)
        self._bounds = list(splits.boundaries)
        edges = [None, *splits.boundaries, None]
        self.tablets = [Tablet(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]

    def __repr__(self) -> str:
        return f"Table({self.name!r}, tablets={len(self.tablets)}, combiners={list(self.combiners)})"

    # -- writes -----------------------------------------------------------

    def tablet_index(self, row: bytes) -> int:
        return bisect_left(self._bounds, row)

    def put(self, row: bytes, colq: bytes, value: bytes = b"") -> None:
        self.put_batches(((row, (colq,), value),))

    def put_entry(self, entry: Entry) -> None:
        (row, colq), value = entry
        self.put_batches(((row, (colq,), value),))

    def put_many(self, entries: Iterable[Pair]) -> None:
        """Write ``((row, colq), value)`` entries in any order."""
        self.put_batches((row, (colq,), value) for (row, colq), value in entries)

    def put_batches(self, batches: Iterable[tuple[bytes, Sequence[bytes], bytes]]) -> None:
        """Write ``(row, colqs, value)`` batches: one entry per colq, same value.

        This is the bulk path used by the multiply; duplicate keys (within or
        across batches) fold through the key-local combiner immediately.
        """
        bounds = self._bounds
        tablets = self.tablets
        lift, merge = self._local.lift, self._local.merge
        limit = self.engine.buffer_bytes
        last_value = object()
        state = None
        last_row = None
        tab = tablets[0]
        for row, colqs, value in batches:
            n = len(colqs)
            if not n:
                continue
            if value is not last_value:
                last_value = value
                state = lift(value)
            if row is not last_row:
                last_row = row
                if bounds:
                    tab = tablets[bisect_left(bounds, row)]
            with tab.lock:
                buf = tab.buffer
                cols = buf.get(row)
                if cols is None:
                    cols = buf[row] = dict.fromkeys(colqs, state)
                    if len(cols) == n:
                        added = n
                    else:  # repeated colqs in the batch must still fold
                        del buf[row]
                        cols = buf[row] = {}
                        added = None
                else:
                    added = None
                if added is None:
                    before = len(cols)
                    get = cols.get
                    for c in colqs:
                        old = get(c)
                        cols[c] = state if old is None else merge(old, state)
                    added = len(cols) - before
                tab.write_count += n
                if added:
                    tab.buffer_bytes += added * (len(row) + len(colqs[0]) + len(value))
                    if tab.buffer_bytes >= limit:
                        self._flush_locked(tab)

    # -- flush / compaction -----------------------------------------------

    def _buffer_sorted(self, tab: Tablet, start=None, end=None) -> tuple[list, list, list]:
        """Buffered entries in key order as parallel row / colq / value lists."""
        lowered = _Lowered(self._local.lower)
        buf = tab.buffer
        rows: list = []
        colqs: list = []
        values: list = []
        for row in sorted(buf):
            if (start is not None and row < start) or (end is not None and row > end):
                continue
            cols = buf[row]
            cs = sorted(cols)
            rows.extend([row] * len(cs))
            colqs.extend(cs)
            values.extend([lowered[st] for st in map(cols.__getitem__, cs)])
        return rows, colqs, values

    def _buffer_pairs(self, tab: Tablet, start=None, end=None) -> list:
        rows, colqs, values = self._buffer_sorted(tab, start, end)
        return list(zip(zip(rows, colqs), values))

    def _flush_locked(self, tab: Tablet) -> None:
        if not tab.buffer:
            return
        rows, colqs, values = self._buffer_sorted(tab)
        if self.engine.spill_dir is None:
            run = MemoryRun(rows, colqs, values) if rows else None
        else:
            run = build_run(zip(zip(rows, colqs), values), self.engine.spill_dir)
        tab.buffer = {}
        tab.buffer_bytes = 0
        if run is not None:
            tab.runs = tab.runs + [run]
        if len(tab.runs) > self.engine.max_runs:
            self._compact_locked(tab)

    def _compact_locked(self, tab: Tablet) -> None:
        if not tab.buffer and len(tab.runs) <= 1 and not self._spanning:
            return
        runs = list(tab.runs)
        buffered = self._buffer_pairs(tab) if tab.buffer else []
        if self._spanning or self.engine.spill_dir is not None:
            run = build_run(self._stream(runs, buffered, None, None), self.engine.spill_dir)
        else:
            keys, values = self._merged(runs, buffered, None, None)
            run = MemoryRun(list(map(_first, keys)), list(map(_second, keys)), values) if keys else None
        tab.buffer = {}
        tab.buffer_bytes = 0
        tab.runs = [run] if run is not None else []

    def flush(self) -> None:
        """Spill every tablet buffer to a new sorted run."""
        for tab in self.tablets:
            with tab.lock:
                self._flush_locked(tab)

    def compact(self) -> None:
        """Merge each tablet's runs and buffer into one run, applying the full stack."""
        self.engine.map_tablets(self._compact_one, range(len(self.tablets)))

    def _compact_one(self, i: int) -> None:
        tab = self.tablets[i]
        with tab.lock:
            self._compact_locked(tab)

    # -- reads ------------------------------------------------------------

    def _merged(self, runs: list, buffered: list, start, end) -> tuple[list, list]:
        """Key-ordered, key-local-combined contents as ``(keys, values)`` lists."""
        sources = [r.iter_range(start, end) for r in runs]
        if buffered:
            sources.append(buffered)
        if len(sources) == 1:
            pairs = list(sources[0])
            return list(map(_first, pairs)), list(map(_second, pairs))
        # stable sort keeps equal keys oldest first; timsort merges the runs
        pairs = list(chain.from_iterable(sources))
        pairs.sort(key=_first)
        return fold_sorted(pairs, self._local)

    def _stream(self, runs: list, buffered: list, start, end) -> Iterable[Pair]:
        sources = [r.iter_range(start, end) for r in runs]
        if buffered:
            sources.append(buffered)
        if not sources:
            return iter(())
        if len(sources) == 1:
            stream = sources[0]
        else:
            stream = zip(*self._merged(runs, buffered, start, end))
        return apply_spanning(stream, self._spanning)

    def scan_tablet(self, i: int, start: Optional[bytes] = None,
                    end: Optional[bytes] = None) -> Iterator[Pair]:
        """Combined entries of tablet ``i`` restricted to rows in ``[start, end]``."""
        tab = self.tablets[i]
        with tab.lock:
            runs = list(tab.runs)
            buffered = self._buffer_pairs(tab, start, end) if tab.buffer else []
            tab.scan_count += 1
        return iter(self._stream(runs, buffered, start, end))

    def tablet_span(self, start: Optional[bytes], end: Optional[bytes]) -> range:
        first = 0 if start is None else bisect_left(self._bounds, start)
        last = len(self.tablets) - 1 if end is None else bisect_left(self._bounds, end)
        return range(first, last + 1)

    def scan(self, start: Optional[bytes] = None, end: Optional[bytes] = None) -> Iterator[Pair]:
        """Globally key-ordered scan over rows in ``[start, end]`` (inclusive)."""
        for i in self.tablet_span(start, end):
            yield from self.scan_tablet(i, start, end)

    def tablet_rows(self, i: int) -> tuple[Optional[bytes], Optional[bytes]]:
        """Inclusive ``(first, last)`` row bounds usable as a ranged scan of tablet ``i``."""
        tab = self.tablets[i]
        start = None if tab.start is None else tab.start + b"\x00"
        return start, tab.end

    def __iter__(self) -> Iterator[Pair]:
        return self.scan()


class Engine:
    """Owns tables and the knobs shared by all of them.

    ``buffer_bytes`` is the per-tablet in-memory budget (row + colq + value
    bytes of distinct buffered keys) that triggers an automatic flush;
    ``max_runs`` triggers an automatic compaction; ``spill_dir`` moves runs to
    temp files; ``workers`` is the thread count for per-tablet work.
    """

    def __init__(self, buffer_bytes: int = 1 << 20, max_runs: int = 15,
                 spill_dir: Optional[str] = None, workers: int = 1):
        if buffer_bytes < 1 or max_runs < 1 or workers < 1:
            raise ValueError("buffer_bytes, max_runs and workers must be positive")
        self.buffer_bytes = buffer_bytes
        self.max_runs = max_runs
        self.spill_dir = spill_dir
        self.workers = workers
        self.tables: dict[str, Table] = {}
        self._lock = threading.Lock()

    def create_table(self, name: str, splits: SplitPoints | None = None,
                     combiners: Sequence[object] = ()) -> Table:
        with self._lock:
            if name in self.tables:
                raise TableExistsError(name)
            table = Table(self, name, splits or SplitPoints(()), combiners)
            self.tables[name] = table
            return table

    def table(self, name: str) -> Table:
        try:
            return self.tables[name]
        except KeyError:
            raise TableNotFoundError(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self.tables

    def drop(self, name: str) -> None:
        with self._lock:
            self.tables.pop(name, None)

    def clone(self, source: Table | str, new_name: str,
              combiners: Sequence[object] | None = None) -> Table:
        """Copy-on-write clone: same splits, shared immutable runs.

        The source is flushed first so its buffered writes are part of the
        shared state.  ``combiners`` defaults to the source's stack.
        """
        src = self.table(source) if isinstance(source, str) else source
        src.flush()
        with self._lock:
            if new_name in self.tables:
                raise TableExistsError(new_name)
            dst = Table(self, new_name, src.splits,
                        src.combiners if combiners is None else combiners)
            for s, d in zip(src.tablets, dst.tablets):
                with s.lock:
                    d.runs = list(s.runs)
            self.tables[new_name] = dst
            return dst

    def map_tablets(self, fn, indices) -> list:
        """Run ``fn`` over tablet indices on the worker pool, results in index order."""
        indices = list(indices)
        if self.workers == 1 or len(indices) <= 1:
            return [fn(i) for i in indices]
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(fn, indices))


def _render(b: bytes) -> str:
    if b and all(0x21 <= c < 0x7F and c != 0x5C for c in b) and not b.startswith(b"0x"):
        return b.decode("ascii")
    return "0x" + b.hex()


def dump_tsv(table: Table, out: IO[str]) -> int:
    """Write ``row<TAB>colq<TAB>value`` lines; non-printable fields become ``0x``-hex."""
    n = 0
    for (row, colq), value in table.scan():
        out.write(f"{_render(row)}\t{_render(colq)}\t{_render(value)}\n")
        n += 1
    return n
