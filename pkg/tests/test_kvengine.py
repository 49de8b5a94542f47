import gc
import io
import os
import random
import threading

import pytest
from hypothesis import given, settings, strategies as st

from tabletri.kvengine import (
    Combiner,
    DiskRun,
    Engine,
    LatestValue,
    MemoryRun,
    SplitPoints,
    StreamCombiner,
    SummingCombiner,
    TableExistsError,
    TableNotFoundError,
    compute_equal_splits,
    decode_int,
    dump_tsv,
    encode_int,
)
from tabletri.kvengine.runs import build_run

from helpers import as_ints, summing_table, v

K = (b"\x01", b"\x02")


def test_int_codec_roundtrip_and_order():
    for a, b in [(0, 1), (1, 255), (255, 256), (2**40, 2**40 + 1)]:
        assert decode_int(encode_int(a)) == a
        assert encode_int(a) < encode_int(b)
    with pytest.raises(ValueError):
        decode_int(b"\x01")


# -- put --------------------------------------------------------------------

def test_single_put_scans_back():
    t = summing_table(Engine())
    t.put(*K, v(2))
    assert as_ints(t) == [(K, 2)]


@pytest.mark.parametrize("values,total", [([2, 2], 4), ([2, 2, 2], 6)])
def test_duplicate_puts_sum(values, total):
    t = summing_table(Engine())
    for x in values:
        t.put(*K, v(x))
    assert as_ints(t) == [(K, total)]
    # merged on insert: one buffered key
    assert t.tablets[0].buffered_count == 1


def test_put_counts_writes_per_tablet():
    t = summing_table(Engine(), splits=SplitPoints((b"m",)))
    t.put(b"a", b"x", v(1))
    t.put(b"z", b"x", v(1))
    t.put(b"z", b"y", v(1))
    assert [tab.write_count for tab in t.tablets] == [1, 2]


def test_latest_value_is_default():
    t = Engine().create_table("t")
    t.put(*K, b"old")
    t.put(*K, b"new")
    t.flush()
    t.put(*K, b"newest")
    assert list(t.scan()) == [(K, b"newest")]


def test_empty_value_distinct_from_absent():
    t = Engine().create_table("t")
    t.put(b"r", b"c", b"")
    assert list(t.scan()) == [((b"r", b"c"), b"")]


def test_put_batches_repeated_colqs_fold():
    t = summing_table(Engine())
    t.put_batches([(b"r", [b"a", b"a", b"b"], v(2))])
    assert as_ints(t) == [((b"r", b"a"), 4), ((b"r", b"b"), 2)]


# -- flush --------------------------------------------------------------------

def test_flush_empty_buffer_adds_no_run():
    t = summing_table(Engine())
    t.flush()
    assert t.tablets[0].runs == []


def test_flush_combines_buffer_into_run():
    t = summing_table(Engine())
    t.put(*K, v(2))
    t.put(*K, v(2))
    t.flush()
    tab = t.tablets[0]
    assert tab.buffer == {} and len(tab.runs) == 1
    assert list(tab.runs[0].iter_range()) == [(K, v(4))]


def test_auto_flush_and_compaction_thresholds():
    eng = Engine(buffer_bytes=64, max_runs=3)
    t = summing_table(eng)
    for i in range(200):
        t.put(v(i % 17), v(i), v(1))
    tab = t.tablets[0]
    assert 1 <= len(tab.runs) <= 3
    assert sum(x for _, x in as_ints(t)) == 200


# -- compact ---------------------------------------------------------------------

def test_compact_single_run_keeps_contents():
    t = summing_table(Engine())
    t.put(*K, v(3))
    t.flush()
    before = list(t.tablets[0].runs[0].iter_range())
    t.compact()
    assert len(t.tablets[0].runs) == 1
    assert list(t.tablets[0].runs[0].iter_range()) == before


def test_compact_two_way_merge():
    t = summing_table(Engine())
    k2 = (b"\x01", b"\x03")
    t.put(*K, v(2))
    t.flush()
    t.put(*K, v(2))
    t.put(*k2, v(2))
    t.flush()
    assert len(t.tablets[0].runs) == 2
    t.compact()
    tab = t.tablets[0]
    assert len(tab.runs) == 1 and not tab.buffer
    assert list(tab.runs[0].iter_range()) == [(K, v(4)), (k2, v(2))]


class _Tally(StreamCombiner):
    """Key-spanning: replace the whole stream with one entry holding its length."""

    def apply(self, stream):
        n = sum(1 for _ in stream)
        if n:
            yield (b"~", b"~"), encode_int(n)


def test_spanning_combiner_not_applied_on_insert():
    t = Engine().create_table("t", None, [SummingCombiner(), _Tally()])
    t.put(b"a", b"a", v(1))
    t.put(b"b", b"b", v(1))
    assert t.tablets[0].buffered_count == 2
    t.flush()
    assert len(t.tablets[0].runs[0]) == 2
    assert list(t.scan()) == [((b"~", b"~"), v(2))]
    t.compact()
    assert list(t.tablets[0].runs[0].iter_range()) == [((b"~", b"~"), v(2))]


def test_combiner_stack_validation():
    with pytest.raises(ValueError):
        Engine().create_table("t", None, [_Tally(), SummingCombiner()])
    with pytest.raises(TypeError):
        Engine().create_table("t", None, [object()])


# -- scan ------------------------------------------------------------------------

def test_scan_empty_table():
    assert list(summing_table(Engine()).scan()) == []


def test_scan_k3_order():
    t = summing_table(Engine())
    for r, c in [(2, 3), (1, 3), (1, 2)]:
        t.put(v(r), v(c), v(1))
    assert [k for k, _ in t.scan()] == [(v(1), v(2)), (v(1), v(3)), (v(2), v(3))]


def test_ranged_scan_touches_one_tablet():
    t = summing_table(Engine(), splits=SplitPoints((b"f", b"m", b"t")))
    for row in [b"a", b"g", b"h", b"n", b"z"]:
        t.put(row, b"c", v(1))
    got = [k[0] for k, _ in t.scan(b"g", b"k")]
    assert got == [b"g", b"h"]
    assert [tab.scan_count for tab in t.tablets] == [0, 1, 0, 0]


def test_ranged_scan_is_inclusive_across_runs():
    t = summing_table(Engine())
    for i in range(10):
        t.put(v(i), b"c", v(1))
        if i % 3 == 0:
            t.flush()
    assert [decode_int(k[0]) for k, _ in t.scan(v(3), v(6))] == [3, 4, 5, 6]


# -- clone -----------------------------------------------------------------------

def test_clone_identical_and_isolated():
    eng = Engine()
    a = summing_table(eng, "A")
    for i in range(5):
        a.put(v(i), v(i + 1), v(1))
    c = eng.clone(a, "C")
    assert list(c.scan()) == list(a.scan())
    c.put(v(0), v(1), v(2))
    c.put(v(9), v(9), v(1))
    assert as_ints(a)[0] == ((v(0), v(1)), 1)
    assert len(list(a.scan())) == 5
    a.put(v(7), v(7), v(1))
    assert (v(7), v(7)) not in dict(c.scan())


def test_clone_shares_runs():
    eng = Engine()
    a = summing_table(eng, "A", compute_equal_splits([((v(i), v(0)), v(1)) for i in range(40)], 4))
    for i in range(40):
        a.put(v(i), v(0), v(1))
    a.compact()
    c = eng.clone(a, "C", [SummingCombiner()])
    assert c.splits == a.splits
    for ta, tc in zip(a.tablets, c.tablets):
        assert len(ta.runs) == len(tc.runs) == 1
        assert ta.runs[0] is tc.runs[0]


def test_clone_name_collision_and_missing():
    eng = Engine()
    summing_table(eng, "A")
    summing_table(eng, "B")
    with pytest.raises(TableExistsError):
        eng.clone("A", "B")
    with pytest.raises(TableNotFoundError):
        eng.clone("nope", "X")
    with pytest.raises(TableExistsError):
        summing_table(eng, "A")


# -- splits ---------------------------------------------------------------------

def _rows_entries(sizes):
    return [((v(r), v(c)), v(1)) for r, n in enumerate(sizes) for c in range(n)]


def test_equal_splits_examples():
    assert compute_equal_splits(_rows_entries([1, 1, 1, 1]), 1).boundaries == ()
    assert compute_equal_splits(_rows_entries([1, 1, 1, 1]), 2).boundaries == (v(1),)
    sp = compute_equal_splits(_rows_entries([5, 4, 3, 2, 1]), 3)
    loads = _loads(_rows_entries([5, 4, 3, 2, 1]), sp)
    assert sp.n_tablets <= 3
    assert all(abs(x - 5) <= 5 for x in loads)
    with pytest.raises(ValueError):
        compute_equal_splits([], 0)


def _loads(entries, sp):
    loads = [0] * sp.n_tablets
    for (r, _), _ in entries:
        loads[sp.tablet_of(r)] += 1
    return loads


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(1, 30), min_size=1, max_size=60), st.integers(1, 24))
def test_equal_splits_balance(sizes, n):
    entries = _rows_entries(sizes)
    sp = compute_equal_splits(entries, n)
    loads = _loads(entries, sp)
    assert sp.n_tablets <= n
    assert max(loads) - min(loads) <= max(sizes)
    ideal = len(entries) / sp.n_tablets
    assert all(abs(x - ideal) <= max(sizes) for x in loads)


def test_split_points_validation():
    with pytest.raises(ValueError):
        SplitPoints((b"b", b"a"))
    with pytest.raises(ValueError):
        SplitPoints((b"a", b"a"))
    sp = SplitPoints((b"b", b"d"))
    assert [sp.tablet_of(r) for r in (b"a", b"b", b"c", b"d", b"e")] == [0, 0, 1, 1, 2]


# -- runs and spilling -------------------------------------------------------------

def test_build_run_empty_is_none():
    assert build_run([]) is None


def test_disk_run_ranges(tmp_path):
    pairs = [((v(i), v(j)), v(i * j)) for i in range(300) for j in range(3)]
    run = build_run(pairs, str(tmp_path))
    assert isinstance(run, DiskRun) and len(run) == 900
    assert list(run.iter_range()) == pairs
    assert list(run.iter_range(v(100), v(101))) == pairs[300:306]
    assert run.count_range(v(299), None) == 3
    mem = MemoryRun([k[0] for k, _ in pairs], [k[1] for k, _ in pairs], [x for _, x in pairs])
    assert list(mem.iter_range(v(100), v(101))) == pairs[300:306]


def test_spilled_engine_matches_memory(tmp_path):
    rnd = random.Random(7)
    writes = [(v(rnd.randrange(50)), v(rnd.randrange(50)), v(rnd.randrange(1, 4))) for _ in range(3000)]
    results = []
    for spill in (None, str(tmp_path)):
        eng = Engine(buffer_bytes=512, max_runs=4, spill_dir=spill)
        t = summing_table(eng, splits=SplitPoints((v(20),)))
        for w in writes:
            t.put(*w)
        results.append(list(t.scan()))
    assert results[0] == results[1]
    assert os.listdir(tmp_path)
    del eng, t
    gc.collect()
    assert not os.listdir(tmp_path)


# -- concurrency ---------------------------------------------------------------------

def test_concurrent_writers():
    eng = Engine(buffer_bytes=256, workers=4)
    t = summing_table(eng, splits=SplitPoints((v(10), v(20))))

    def work(seed):
        rnd = random.Random(seed)
        for _ in range(2000):
            t.put(v(rnd.randrange(30)), v(rnd.randrange(5)), v(1))

    threads = [threading.Thread(target=work, args=(s,)) for s in range(4)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    t.compact()
    assert sum(x for _, x in as_ints(t)) == 8000


# -- debug dump -------------------------------------------------------------------------

def test_dump_tsv_hex_for_binary():
    t = Engine().create_table("t")
    t.put(b"row1", b"\x00\x01", b"")
    t.put(b"row2", b"col", b"val")
    buf = io.StringIO()
    assert dump_tsv(t, buf) == 2
    assert buf.getvalue() == "row1\t0x0001\t0x\nrow2\tcol\tval\n"


class _Max(Combiner):
    lift = staticmethod(decode_int)
    merge = staticmethod(max)
    lower = staticmethod(encode_int)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 3), st.integers(0, 9),
                          st.sampled_from(["put", "put", "put", "flush", "compact"])), max_size=80),
       st.sampled_from(["sum", "max", "latest"]))
def test_scan_stability_any_associative_combiner(ops, kind):
    comb = {"sum": SummingCombiner(), "max": _Max(), "latest": LatestValue()}[kind]
    t = Engine(buffer_bytes=48, max_runs=2).create_table("t", SplitPoints((v(2),)), [comb])
    expect = {}
    for r, c, x, op in ops:
        if op == "flush":
            t.flush()
        elif op == "compact":
            t.compact()
        else:
            key = (v(r), v(c))
            old = expect.get(key)
            expect[key] = x if old is None else {"sum": old + x, "max": max(old, x), "latest": x}[kind]
            t.put(*key, v(x))
    assert [(k, decode_int(val)) for k, val in t.scan()] == sorted(expect.items())
