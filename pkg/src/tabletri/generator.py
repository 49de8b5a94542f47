"""Unpermuted RMAT/Kronecker graphs, TSV edge lists and small fixture graphs."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Optional

import numpy as np

from .schema import EdgeList

GRAPH500_PROBS = (0.57, 0.19, 0.19, 0.05)
# edges drawn per independently seeded block; fixes the stream regardless of workers
BLOCK_EDGES = 1 << 16


@dataclass(frozen=True)
class GraphSpec:
    scale: int
    edge_factor: int = 16
    probs: tuple[float, float, float, float] = GRAPH500_PROBS
    seed: int = 20160331

    def __post_init__(self) -> None:
        if self.scale < 1:
            raise ValueError(f"scale must be >= 1, got {self.scale}")
        if self.scale > 31:
            raise ValueError("scale above 31 does not fit 32-bit vertex ids")
        if self.edge_factor < 1:
            raise ValueError(f"edge_factor must be >= 1, got {self.edge_factor}")
        if len(self.probs) != 4 or any(p < 0 for p in self.probs):
            raise ValueError("probs must be four non-negative numbers")
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError(f"probs must sum to 1, got {sum(self.probs)!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def n_vertices(self) -> int:
        return 1 << self.scale

    @property
    def n_raw_edges(self) -> int:
        return self.edge_factor << self.scale


def _rmat_block(spec: GraphSpec, block: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=spec.seed, spawn_key=(block,)))
    a, b, c, _ = spec.probs
    ab, abc = a + b, a + b + c
    rows = np.zeros(count, dtype=np.int64)
    cols = np.zeros(count, dtype=np.int64)
    for _ in range(spec.scale):
        u = rng.random(count)
        row_bit = u >= ab
        col_bit = ((u >= a) & (u < ab)) | (u >= abc)
        rows = (rows << 1) | row_bit
        cols = (cols << 1) | col_bit
    return rows, cols


def rmat_raw(spec: GraphSpec, workers: int = 1) -> np.ndarray:
    """``edge_factor * 2**scale`` directed pairs, shape ``(m, 2)``.

    Each pair descends ``scale`` levels, picking quadrant a/b/c/d with the
    spec's probabilities; no vertex permutation is applied.  Blocks of
    :data:`BLOCK_EDGES` pairs get their own child seed, so the output does
    not depend on ``workers``.
    """
    m = spec.n_raw_edges
    blocks = [(i, min(BLOCK_EDGES, m - i * BLOCK_EDGES)) for i in range((m + BLOCK_EDGES - 1) // BLOCK_EDGES)]
    if workers > 1 and len(blocks) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda bc: _rmat_block(spec, *bc), blocks))
    else:
        parts = [_rmat_block(spec, *bc) for bc in blocks]
    if not parts:
        return np.zeros((0, 2), dtype=np.int64)
    rows = np.concatenate([p[0] for p in parts])
    cols = np.concatenate([p[1] for p in parts])
    return np.stack([rows, cols], axis=1)


def symmetrize_simplify(pairs, n_vertices: Optional[int] = None) -> EdgeList:
    """A + A^T, diagonal removed, values set to 1: an undirected simple graph."""
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if arr.size == 0:
        return EdgeList((), n_vertices or 0)
    arr = arr[arr[:, 0] != arr[:, 1]]
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    uniq = np.unique(np.stack([lo, hi], axis=1), axis=0)
    edges = tuple((int(u), int(w)) for u, w in uniq)
    if n_vertices is None:
        n_vertices = (edges[-1][1] + 1) if edges else 0
    return EdgeList(edges, n_vertices)


def generate(spec: GraphSpec, workers: int = 1) -> EdgeList:
    return symmetrize_simplify(rmat_raw(spec, workers), spec.n_vertices)


# -- TSV ---------------------------------------------------------------------

class TsvFormatError(ValueError):
    def __init__(self, path, lineno: int, line: str):
        super().__init__(f"{path}:{lineno}: expected 'u<TAB>w', got {line!r}")
        self.lineno = lineno


def load_tsv(path: str | os.PathLike) -> EdgeList:
    """Read ``u<TAB>w`` lines (``#`` comments allowed).

    Non-negative integer tokens are used as ids directly.  If any token is
    not an integer, all tokens are mapped to dense ids in sorted order and
    kept in ``labels``.  A ``# n_vertices=N`` comment restores isolated
    trailing vertices.
    """
    pairs: list[tuple[str, str]] = []
    n_vertices = None
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.rstrip("\r\n")
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                body = stripped[1:].strip()
                if body.startswith("n_vertices="):
                    n_vertices = int(body.split("=", 1)[1])
                continue
            parts = line.split("\t")
            if len(parts) < 2 or not parts[0].strip() or not parts[1].strip():
                raise TsvFormatError(path, lineno, line)
            pairs.append((parts[0].strip(), parts[1].strip()))

    if all(t.isdigit() for p in pairs for t in p):
        ints = [(int(u), int(w)) for u, w in pairs]
        return EdgeList.from_pairs(ints, n_vertices=_resolve_n(ints, n_vertices))
    tokens = sorted({t for p in pairs for t in p})
    ids = {t: i for i, t in enumerate(tokens)}
    return EdgeList.from_pairs([(ids[u], ids[w]) for u, w in pairs],
                               n_vertices=len(tokens), labels=tuple(tokens))


def _resolve_n(pairs, declared: Optional[int]) -> Optional[int]:
    seen = max((max(p) for p in pairs), default=-1) + 1
    return seen if declared is None else max(declared, seen)


def format_tsv(g: EdgeList) -> str:
    buf = io.StringIO()
    buf.write(f"# n_vertices={g.n_vertices}\n")
    if g.labels is None:
        buf.writelines(f"{u}\t{w}\n" for u, w in g.edges)
    else:
        lab = g.labels
        buf.writelines(f"{lab[u]}\t{lab[w]}\n" for u, w in g.edges)
    return buf.getvalue()


def save_tsv(g: EdgeList, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_tsv(g))


# -- fixtures ----------------------------------------------------------------

def make_complete(n: int) -> EdgeList:
    return EdgeList(tuple(combinations(range(n), 2)), n)


def make_path(n: int) -> EdgeList:
    return EdgeList(tuple((i, i + 1) for i in range(n - 1)), max(n, 0))


def make_star(n: int) -> EdgeList:
    """Hub 0 joined to leaves 1..n-1."""
    return EdgeList(tuple((0, i) for i in range(1, n)), max(n, 0))


def make_cycle(n: int) -> EdgeList:
    if n < 3:
        raise ValueError("a cycle needs at least 3 vertices")
    return EdgeList.from_pairs([(i, (i + 1) % n) for i in range(n)], n)


def make_binary_tree(n: int) -> EdgeList:
    return EdgeList(tuple(sorted(((i - 1) // 2, i) for i in range(1, n))), max(n, 0))


def make_gnp(n: int, p: float, seed: int) -> EdgeList:
    """Erdos-Renyi G(n, p)."""
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return EdgeList(tuple(zip(iu[keep].tolist(), ju[keep].tolist())), n)


def from_edges(edges: Iterable[tuple[int, int]], n_vertices: Optional[int] = None) -> EdgeList:
    return EdgeList.from_pairs(edges, n_vertices)
