"""Byte codecs and builders for adjacency and incidence tables."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .kvengine import Engine, SummingCombiner, Table, compute_equal_splits, encode_int, gc_paused

ONE = encode_int(1)
VERTEX_WIDTH = 4
_MAX_VERTEX = (1 << 32) - 1


def encode_vertex(v: int) -> bytes:
    """4-byte big-endian; byte order matches numeric order."""
    if not 0 <= v <= _MAX_VERTEX:
        raise ValueError(f"vertex id out of 32-bit range: {v}")
    return v.to_bytes(VERTEX_WIDTH, "big")


def decode_vertex(b: bytes) -> int:
    if len(b) != VERTEX_WIDTH:
        raise ValueError(f"vertex encoding must be {VERTEX_WIDTH} bytes, got {len(b)}")
    return int.from_bytes(b, "big")


def encode_edge(u: int, w: int) -> bytes:
    if u == w:
        raise ValueError(f"self-edge ({u}, {w}) has no edge label")
    if u > w:
        u, w = w, u
    return encode_vertex(u) + encode_vertex(w)


def decode_edge(b: bytes) -> tuple[int, int]:
    if len(b) != 2 * VERTEX_WIDTH:
        raise ValueError(f"edge label must be {2 * VERTEX_WIDTH} bytes, got {len(b)}")
    u, w = decode_vertex(b[:VERTEX_WIDTH]), decode_vertex(b[VERTEX_WIDTH:])
    if not u < w:
        raise ValueError(f"edge label not ascending: [{u}, {w}]")
    return u, w


class FixedWidthCodec:
    name = "fixed"
    encode = staticmethod(encode_vertex)
    decode = staticmethod(decode_vertex)


class DecimalStringCodec:
    """ASCII decimal vertex ids.  Byte order differs from numeric order
    (``b"10" < b"9"``), which permutes rows and columns."""

    name = "decimal-string"

    @staticmethod
    def encode(v: int) -> bytes:
        if v < 0:
            raise ValueError(f"negative vertex id: {v}")
        return str(v).encode("ascii")

    @staticmethod
    def decode(b: bytes) -> int:
        if not b.isdigit():
            raise ValueError(f"not a decimal vertex id: {b!r}")
        return int(b)


CODECS = {c.name: c for c in (FixedWidthCodec, DecimalStringCodec)}


def get_codec(name: str):
    try:
        return CODECS[name]
    except KeyError:
        raise ValueError(f"unknown encoding {name!r}; choose from {sorted(CODECS)}") from None


@dataclass(frozen=True)
class EdgeList:
    """Undirected simple graph as sorted ``(u, w)`` pairs with ``u < w``.

    ``labels`` optionally maps dense ids back to the tokens they were read from.
    """

    edges: tuple[tuple[int, int], ...]
    n_vertices: int
    labels: Optional[tuple[str, ...]] = field(default=None, compare=True)

    def __post_init__(self) -> None:
        prev = None
        for e in self.edges:
            u, w = e
            if not u < w:
                raise ValueError(f"edge {e} is not ascending (self-loops are not allowed)")
            if prev is not None and not prev < e:
                raise ValueError("edges must be sorted and unique")
            if w >= self.n_vertices:
                raise ValueError(f"edge {e} out of range for {self.n_vertices} vertices")
            prev = e

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]], n_vertices: Optional[int] = None,
                   labels: Optional[tuple[str, ...]] = None) -> "EdgeList":
        """Symmetrize and simplify: drop self-loops, unorder, deduplicate."""
        edges = sorted({(u, w) if u < w else (w, u) for u, w in pairs if u != w})
        if n_vertices is None:
            n_vertices = (edges[-1][1] + 1) if edges else 0
            if labels is not None:
                n_vertices = max(n_vertices, len(labels))
        return cls(tuple(edges), n_vertices, labels)

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def nedges(self) -> int:
        return len(self.edges)

    def degrees(self) -> list[int]:
        deg = [0] * self.n_vertices
        for u, w in self.edges:
            deg[u] += 1
            deg[w] += 1
        return deg


def _oriented(g: EdgeList, codec, upper: bool) -> list:
    enc = {}
    for u, w in g.edges:
        for v in (u, w):
            if v not in enc:
                enc[v] = codec.encode(v)
    out = []
    for u, w in g.edges:
        a, b = enc[u], enc[w]
        lo, hi = (a, b) if a < b else (b, a)
        out.append(((lo, hi), ONE) if upper else ((hi, lo), ONE))
    out.sort()
    return out


def _load(engine: Engine, name: str, entries: list, n_tablets: int) -> Table:
    splits = compute_equal_splits(entries, n_tablets)
    table = engine.create_table(name, splits, [SummingCombiner()])
    with gc_paused():
        table.put_many(entries)
        table.compact()
    return table


def build_upper_adjacency(g: EdgeList, engine: Engine, n_tablets: int = 1,
                          name: str = "A", codec=FixedWidthCodec) -> Table:
    """One ``(row=u, colq=w, 1)`` entry per edge with ``enc(u) < enc(w)``."""
    return _load(engine, name, _oriented(g, codec, upper=True), n_tablets)


def build_lower_adjacency(g: EdgeList, engine: Engine, n_tablets: int = 1,
                          name: str = "AL", codec=FixedWidthCodec) -> Table:
    """One ``(row=w, colq=u, 1)`` entry per edge with ``enc(u) < enc(w)``."""
    return _load(engine, name, _oriented(g, codec, upper=False), n_tablets)


def build_incidence(g: EdgeList, engine: Engine, n_tablets: int = 1, name: str = "E") -> Table:
    """Two entries per edge ``{u, w}``: one in row ``u`` and one in row ``w``,
    both under the column ``[u, w]``."""
    entries = []
    for u, w in g.edges:
        label = encode_edge(u, w)
        entries.append(((encode_vertex(u), label), ONE))
        entries.append(((encode_vertex(w), label), ONE))
    entries.sort()
    return _load(engine, name, entries, n_tablets)
