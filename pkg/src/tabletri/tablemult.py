"""Matrix multiply over tables: row-aligned outer product and masked inner product."""

from __future__ import annotations

from bisect import bisect_right
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Collection, Iterable, Iterator, Optional

from .kvengine import Table, encode_int
from .kvengine.combiners import Pair

TWO = encode_int(2)
EMPTY = b""

# f(row, left_entries, right_entries) -> [(out_row, [colq, ...], value), ...]
RowMultiplyFn = Callable[[bytes, list, list], list]


@dataclass
class MultiplyStats:
    nppf: int = 0
    npp_total: int = 0
    per_tablet_emitted: list[int] = field(default_factory=list)

    def __iadd__(self, other: "MultiplyStats") -> "MultiplyStats":
        self.nppf += other.nppf
        self.npp_total += other.npp_total
        self.per_tablet_emitted.extend(other.per_tablet_emitted)
        return self


def expand(batches: Iterable[tuple[bytes, list, bytes]]) -> list[Pair]:
    """Flatten row-multiply output into ``((row, colq), value)`` entries."""
    return [((row, c), value) for row, colqs, value in batches for c in colqs]


def row_multiply_adjacency(row: bytes, left: list, right: list) -> list:
    """Every pair of columns ``c < c'`` in one upper-adjacency row yields ``(c, c', 2)``.

    Output is batched per ``c``: ``(c, [c' ...], 2)``.  ``left`` and
    ``right`` are the same row (self-multiply); only ``left`` is read.
    """
    cols = [k[1] for k, _ in left]
    return [(c, cols[i + 1:], TWO) for i, c in enumerate(cols[:-1])]


def row_multiply_adj_incidence(row: bytes, left: list, right: list) -> list:
    """Lower-adjacency ``(v, v1)`` times incidence ``(v, [v2, v3])``.

    Emits ``(v1, [v2, v3], empty)`` when ``v1 < v2``.  The comparison is on
    raw bytes against the label's first 4-byte vertex.  Labels are sorted,
    so the qualifying ones form a suffix.
    """
    labels = [k[1] for k, _ in right]
    heads = [lab[:4] for lab in labels]
    out = []
    for (_, v1), _ in left:
        cut = bisect_right(heads, v1)
        if cut < len(labels):
            out.append((v1, labels[cut:], EMPTY))
    return out


def _rows(stream: Iterable[Pair]) -> Iterator[tuple[bytes, list]]:
    cur = None
    group: list = []
    for item in stream:
        row = item[0][0]
        if row != cur:
            if group:
                yield cur, group
            cur = row
            group = [item]
        else:
            group.append(item)
    if group:
        yield cur, group


def _mult_tablet(left: Table, right: Table, f: RowMultiplyFn, sink: Table, i: int,
                 rows: Optional[Collection[bytes]]) -> MultiplyStats:
    start, end = left.tablet_rows(i)
    nppf = npp = 0
    lrows = _rows(left.scan_tablet(i))
    if right is left:
        aligned = ((r, g, g) for r, g in lrows)
    else:
        aligned = _merge_join(lrows, _rows(right.scan(start, end)))
    for row, lg, rg in aligned:
        if rows is not None and row not in rows:
            continue
        npp += len(lg) * len(rg)
        out = f(row, lg, rg)
        if out:
            nppf += sum(len(b[1]) for b in out)
            sink.put_batches(out)
    return MultiplyStats(nppf, npp, [nppf])


def _merge_join(lrows: Iterator, rrows: Iterator) -> Iterator[tuple[bytes, list, list]]:
    r = next(rrows, None)
    for lrow, lg in lrows:
        while r is not None and r[0] < lrow:
            r = next(rrows, None)
        if r is None:
            return
        if r[0] == lrow:
            yield lrow, lg, r[1]


def outer_table_mult(left: Table, right: Table, f: RowMultiplyFn, sink: Table,
                     rows: Optional[Collection[bytes]] = None) -> MultiplyStats:
    """Outer-product multiply ``left^T * right`` by aligning their rows.

    For every row present in both tables, ``f(row, left_entries,
    right_entries)`` produces partial products that are written to
    ``sink``; the sink's combiners do the summing.  Work is split by the
    tablets of ``left``.  ``rows`` restricts which rows generate output.
    """
    parts = left.engine.map_tablets(
        lambda i: _mult_tablet(left, right, f, sink, i, rows), range(len(left.tablets)))
    stats = MultiplyStats()
    for p in parts:
        stats += p
    return stats


def _row_cols(table: Table, row: bytes) -> frozenset:
    return frozenset(k[1] for k, _ in table.scan(row, row))


def inner_product_masked_count(a_upper: Table, rows: Iterable[bytes],
                               cache_size: int = 4096) -> tuple[int, int]:
    """Triangles whose first row is in ``rows``, by masked inner products.

    For each entry ``(r, c)`` of ``a_upper`` with ``r`` in ``rows`` the dot
    product of upper rows ``r`` and ``c`` is taken and summed on the spot;
    nothing is written.  Rows are fetched with ranged scans through an LRU
    cache.  Returns ``(triangles, work)`` where ``work`` counts set-probe
    operations, ``sum(min(|row r|, |row c|))``.
    """
    cache: OrderedDict[bytes, frozenset] = OrderedDict()

    def fetch(row: bytes) -> frozenset:
        cols = cache.get(row)
        if cols is not None:
            cache.move_to_end(row)
            return cols
        cols = _row_cols(a_upper, row)
        cache[row] = cols
        if len(cache) > cache_size:
            cache.popitem(last=False)
        return cols

    triangles = work = 0
    for r in sorted(rows):
        mine = fetch(r)
        for c in sorted(mine):
            other = fetch(c)
            if not other:
                continue
            if len(mine) <= len(other):
                small, big = mine, other
            else:
                small, big = other, mine
            work += len(small)
            triangles += len(small & big)
    return triangles, work
