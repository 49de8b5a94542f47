import random

import pytest
from hypothesis import given, strategies as st

from tabletri.generator import make_complete, make_gnp, make_path, make_star
from tabletri.kvengine import Engine, decode_int
from tabletri.schema import (
    ONE,
    DecimalStringCodec,
    EdgeList,
    build_incidence,
    build_lower_adjacency,
    build_upper_adjacency,
    decode_edge,
    decode_vertex,
    encode_edge,
    encode_vertex,
    get_codec,
)


def _ids(table):
    out = []
    for (r, c), val in table.scan():
        assert val == ONE
        col = decode_edge(c) if len(c) == 8 else decode_vertex(c)
        out.append((decode_vertex(r), col))
    return out


def test_vertex_encoding_examples():
    assert encode_vertex(0) == b"\x00\x00\x00\x00"
    assert encode_vertex(1) == b"\x00\x00\x00\x01"
    assert decode_vertex(encode_vertex(2**32 - 1)) == 2**32 - 1
    for bad in (-1, 2**32):
        with pytest.raises(ValueError):
            encode_vertex(bad)
    for raw in (b"", b"\x00\x00\x01", b"\x00" * 5):
        with pytest.raises(ValueError):
            decode_vertex(raw)


def test_vertex_order_embedding_random_pairs():
    rnd = random.Random(11)
    for _ in range(10_000):
        a, b = rnd.randrange(2**32), rnd.randrange(2**32)
        assert (a < b) == (encode_vertex(a) < encode_vertex(b))


@given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
def test_vertex_roundtrip_and_order(a, b):
    assert decode_vertex(encode_vertex(a)) == a
    assert (a < b) == (encode_vertex(a) < encode_vertex(b))


def test_edge_label_examples():
    assert encode_edge(3, 1) == encode_vertex(1) + encode_vertex(3)
    assert encode_edge(1, 3) == encode_edge(3, 1)
    with pytest.raises(ValueError):
        encode_edge(5, 5)
    assert decode_edge(encode_edge(9, 4)) == (4, 9)
    with pytest.raises(ValueError):
        decode_edge(encode_vertex(3) + encode_vertex(1))


@given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
def test_edge_label_roundtrip(a, b):
    if a == b:
        return
    assert decode_edge(encode_edge(a, b)) == (min(a, b), max(a, b))


def test_decimal_codec_permutes_order():
    enc = DecimalStringCodec.encode
    assert enc(10) < enc(9)
    assert DecimalStringCodec.decode(enc(123)) == 123
    with pytest.raises(ValueError):
        get_codec("utf-16")


def test_edgelist_validation():
    with pytest.raises(ValueError):
        EdgeList(((1, 1),), 2)
    with pytest.raises(ValueError):
        EdgeList(((1, 2), (0, 1)), 3)
    with pytest.raises(ValueError):
        EdgeList(((0, 5),), 3)
    assert EdgeList.from_pairs([(2, 1), (1, 2), (1, 1)]).edges == ((1, 2),)


K3 = EdgeList(((1, 2), (1, 3), (2, 3)), 4)


def test_upper_adjacency_examples():
    assert _ids(build_upper_adjacency(K3, Engine())) == [(1, 2), (1, 3), (2, 3)]
    assert _ids(build_upper_adjacency(EdgeList((), 0), Engine())) == []
    path = EdgeList(((1, 2), (2, 3)), 4)
    assert _ids(build_upper_adjacency(path, Engine())) == [(1, 2), (2, 3)]


def test_lower_adjacency_examples():
    assert _ids(build_lower_adjacency(K3, Engine())) == [(2, 1), (3, 1), (3, 2)]
    assert _ids(build_lower_adjacency(EdgeList((), 0), Engine())) == []
    star = EdgeList(((1, 2), (1, 3), (1, 4)), 5)
    assert _ids(build_lower_adjacency(star, Engine())) == [(2, 1), (3, 1), (4, 1)]


def test_incidence_examples():
    single = EdgeList(((1, 2),), 3)
    assert _ids(build_incidence(single, Engine())) == [(1, (1, 2)), (2, (1, 2))]
    assert len(_ids(build_incidence(K3, Engine()))) == 6


@pytest.mark.parametrize("g", [make_complete(7), make_path(9), make_star(6), make_gnp(40, 0.2, 3)],
                         ids=["K7", "path", "star", "gnp"])
def test_builder_entry_counts_and_columns(g):
    eng = Engine()
    up = build_upper_adjacency(g, eng, 4)
    lo = build_lower_adjacency(g, eng, 4)
    inc = build_incidence(g, eng, 4)
    assert len(list(up.scan())) == len(list(lo.scan())) == g.nedges
    cols = {}
    for (r, c), _ in inc.scan():
        cols.setdefault(c, []).append(decode_vertex(r))
    assert len(cols) == g.nedges
    for label, rows in cols.items():
        assert sorted(rows) == list(decode_edge(label))
    # builders leave one compacted run per tablet
    for t in (up, lo, inc):
        assert all(len(tab.runs) <= 1 and not tab.buffer for tab in t.tablets)
        assert len(t.tablets) <= 4


def test_decimal_encoding_orients_by_bytes():
    g = EdgeList(((9, 10),), 11)
    t = build_upper_adjacency(g, Engine(), codec=DecimalStringCodec)
    assert [k for k, _ in t.scan()] == [(b"10", b"9")]
    assert decode_int(next(iter(t.scan()))[1]) == 1
