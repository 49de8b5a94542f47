"""End-to-end triangle counting pipelines on the tablet engine."""

from __future__ import annotations

import itertools
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from .kvengine import Combiner, Engine, StreamCombiner, SummingCombiner, Table, encode_int, gc_paused
from .kvengine.combiners import Pair
from .tablemult import (
    inner_product_masked_count,
    outer_table_mult,
    row_multiply_adj_incidence,
    row_multiply_adjacency,
)

ONE = encode_int(1)
_names = itertools.count()


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class TriangleResult:
    triangles: int
    nppf: int
    matmul_seconds: float = 0.0
    reduce_seconds: float = 0.0
    per_tablet_load: tuple[int, ...] = ()
    npp_total: int = 0
    inner_work: int = 0
    details: dict = field(default_factory=dict, compare=False)

    @property
    def runtime_seconds(self) -> float:
        return self.matmul_seconds + self.reduce_seconds


# -- iterators ---------------------------------------------------------------

class OddFilterReducer(SummingCombiner):
    """Summing combiner plus the terminal fold over a fully summed tablet.

    Odd values mark keys of A that also received wedges; each contributes
    ``(v - 1) / 2``.  Even values are wedges that A does not close.
    """

    @staticmethod
    def reduce(entries: Iterable[Pair]) -> int:
        total = 0
        for _, value in entries:
            if value[-1] & 1:
                total += int.from_bytes(value, "big") >> 1
        return total


class _Marker:
    __slots__ = ()

    def __repr__(self) -> str:
        return "<empty>"


_MARK = _Marker()


class PairCollapseIterator(Combiner):
    """Two empty values under one key become the number 1.

    Runs wherever key-local combiners run, so a pair meeting in the buffer,
    at flush, or across runs at compaction is collapsed alike.  Numbers
    under one key add up.  A number never absorbs an empty marker: that would
    mean a key got more than two partial products, which the incidence
    structure rules out.
    """

    @staticmethod
    def lift(value: bytes):
        return _MARK if not value else int.from_bytes(value, "big")

    @staticmethod
    def merge(older, newer):
        if older is _MARK and newer is _MARK:
            return 1
        if older is _MARK or newer is _MARK:
            raise ValidationError("empty marker met a collapsed count: a key got more than two partial products")
        return older + newer

    @staticmethod
    def lower(state) -> bytes:
        return b"" if state is _MARK else state.to_bytes(8, "big")


class NumericSumIterator(StreamCombiner):
    """Fold every non-empty value of a tablet stream into one running entry.

    The running entry sits at the key of the last numeric entry seen, which
    keeps the output sorted; empty-valued entries pass through untouched.
    """

    def apply(self, stream: Iterable[Pair]) -> Iterator[Pair]:
        total = None
        last_key = None
        held: list = []
        for key, value in stream:
            if not value:
                if total is None:
                    yield key, value
                else:
                    held.append((key, value))
            else:
                total = int.from_bytes(value, "big") + (total or 0)
                last_key = key
                if held:
                    yield from held
                    held.clear()
        if total is not None:
            yield last_key, total.to_bytes(8, "big")
            yield from held


def _numeric_sum(entries: Iterable[Pair]) -> int:
    return sum(int.from_bytes(v, "big") for _, v in entries if v)


# -- validation --------------------------------------------------------------

def validate_adjacency(table: Table, lower: bool = False) -> None:
    """Strict triangularity and unit values."""
    for (row, colq), value in table.scan():
        if row == colq:
            raise ValidationError(f"diagonal entry at {row!r}")
        if (row > colq) != lower:
            side = "lower" if lower else "upper"
            raise ValidationError(f"entry ({row!r}, {colq!r}) outside the strict {side} triangle")
        if value != ONE:
            raise ValidationError(f"entry ({row!r}, {colq!r}) has value {value!r}, expected 1")


def validate_incidence(table: Table) -> None:
    """8-byte ascending edge labels, unit values, exactly two entries per column,
    each in the row of one of the label's endpoints."""
    seen: Counter = Counter()
    for (row, colq), value in table.scan():
        if len(colq) != 8:
            raise ValidationError(f"edge label {colq!r} is not 8 bytes")
        a, b = colq[:4], colq[4:]
        if not a < b:
            raise ValidationError(f"edge label {colq.hex()} is not ascending")
        if row != a and row != b:
            raise ValidationError(f"row {row.hex()} is not an endpoint of edge {colq.hex()}")
        if value != ONE:
            raise ValidationError(f"incidence value {value!r} at ({row.hex()}, {colq.hex()}), expected 1")
        seen[colq] += 1
    for colq, n in seen.items():
        if n != 2:
            raise ValidationError(f"edge column {colq.hex()} has {n} entries, expected 2")


# -- pipelines ---------------------------------------------------------------

def _scratch(engine: Engine, base: str) -> str:
    while True:
        name = f"{base}_{next(_names)}"
        if name not in engine:
            return name


def _reduce(engine: Engine, t: Table, fold) -> int:
    parts = engine.map_tablets(lambda i: fold(t.scan_tablet(i)), range(len(t.tablets)))
    return sum(parts)


def count_adjacency_only(a_upper: Table, engine: Engine, validate: bool = True,
                         keep: bool = False) -> TriangleResult:
    """Clone A to T, add doubled wedges of A^T A into T, keep odd entries.

    ``keep`` leaves T in the engine (its name is in ``details['T']``).
    """
    if validate:
        validate_adjacency(a_upper)
    with gc_paused():
        return _adjacency_pipeline(a_upper, engine, rows=None, keep=keep)


def _adjacency_pipeline(a_upper: Table, engine: Engine, rows, keep: bool) -> TriangleResult:
    t0 = time.perf_counter()
    t = engine.clone(a_upper, _scratch(engine, a_upper.name + "_T"), [OddFilterReducer()])
    stats = outer_table_mult(a_upper, a_upper, row_multiply_adjacency, t, rows=rows)
    t1 = time.perf_counter()
    triangles = _reduce(engine, t, OddFilterReducer.reduce)
    t2 = time.perf_counter()
    if not keep:
        engine.drop(t.name)
    return TriangleResult(
        triangles=triangles, nppf=stats.nppf, matmul_seconds=t1 - t0, reduce_seconds=t2 - t1,
        per_tablet_load=tuple(stats.per_tablet_emitted), npp_total=stats.npp_total,
        details={"T": t.name} if keep else {},
    )


def count_adj_incidence(a_lower: Table, e: Table, engine: Engine, validate: bool = True,
                        keep: bool = False, numeric_sum: bool = True) -> TriangleResult:
    """``triu(A^T E)`` with empty partial-product markers; count entries equal to 2.

    T takes E's splits and carries pair-collapse then numeric-sum.  With
    ``numeric_sum=False`` the collapsed 1-entries stay visible (for
    inspection); the count is unchanged.
    """
    if validate:
        validate_adjacency(a_lower, lower=True)
        validate_incidence(e)
    with gc_paused():
        return _adj_incidence_pipeline(a_lower, e, engine, keep, numeric_sum)


def _adj_incidence_pipeline(a_lower: Table, e: Table, engine: Engine, keep: bool,
                            numeric_sum: bool) -> TriangleResult:
    t0 = time.perf_counter()
    stack = [PairCollapseIterator(), NumericSumIterator()] if numeric_sum else [PairCollapseIterator()]
    t = engine.create_table(_scratch(engine, e.name + "_T"), e.splits, stack)
    stats = outer_table_mult(a_lower, e, row_multiply_adj_incidence, t)
    t1 = time.perf_counter()
    triangles = _reduce(engine, t, _numeric_sum)
    t2 = time.perf_counter()
    if not keep:
        engine.drop(t.name)
    return TriangleResult(
        triangles=triangles, nppf=stats.nppf, matmul_seconds=t1 - t0, reduce_seconds=t2 - t1,
        per_tablet_load=tuple(stats.per_tablet_emitted), npp_total=stats.npp_total,
        details={"T": t.name} if keep else {},
    )


def row_entry_counts(table: Table) -> dict[bytes, int]:
    counts: dict[bytes, int] = {}
    for (row, _), _ in table.scan():
        counts[row] = counts.get(row, 0) + 1
    return counts


def count_hybrid(a_upper: Table, threshold: Optional[int], engine: Engine,
                 validate: bool = True, cache_size: int = 4096) -> TriangleResult:
    """Inner product for rows with more than ``threshold`` entries, outer product for the rest.

    ``threshold=None`` means no row is high-degree.  Triangles are attributed
    to their smallest vertex, whose row generates the wedge in both paths, so
    the two partial counts add up to the total for any threshold.
    """
    if threshold is not None and threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    if validate:
        validate_adjacency(a_upper)
    with gc_paused():
        return _hybrid_pipeline(a_upper, threshold, engine, cache_size)


def _hybrid_pipeline(a_upper: Table, threshold: Optional[int], engine: Engine,
                     cache_size: int) -> TriangleResult:
    t0 = time.perf_counter()
    counts = row_entry_counts(a_upper)
    if threshold is None:
        high: set = set()
    else:
        high = {r for r, d in counts.items() if d > threshold}
    low = {r for r in counts if r not in high}
    t1 = time.perf_counter()
    inner_t, work = inner_product_masked_count(a_upper, high, cache_size=cache_size)
    t2 = time.perf_counter()
    outer = _adjacency_pipeline(a_upper, engine, rows=low, keep=False)
    return TriangleResult(
        triangles=inner_t + outer.triangles,
        nppf=outer.nppf + work,
        matmul_seconds=(t1 - t0) + (t2 - t1) + outer.matmul_seconds,
        reduce_seconds=outer.reduce_seconds,
        per_tablet_load=outer.per_tablet_load,
        npp_total=outer.npp_total,
        inner_work=work,
        details={"outer_triangles": outer.triangles, "inner_triangles": inner_t,
                 "outer_nppf": outer.nppf, "high_rows": len(high)},
    )
