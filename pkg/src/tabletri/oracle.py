"""Ground truth computed straight from an :class:`EdgeList`, never from tables."""

from __future__ import annotations

from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .schema import EdgeList


def _upper_rows(g: EdgeList, key: Optional[Callable[[int], object]] = None) -> dict[int, list[int]]:
    rows: dict[int, list[int]] = {}
    for u, w in g.edges:
        if key is not None and key(w) < key(u):
            u, w = w, u
        rows.setdefault(u, []).append(w)
    for cols in rows.values():
        cols.sort(key=key)
    return rows


def brute_force_triangles(g: EdgeList) -> int:
    """Count ``u < v < w`` with all three edges, by sorted-neighbour intersection."""
    higher = _upper_rows(g)
    sets = {u: set(ws) for u, ws in higher.items()}
    total = 0
    for u, ws in higher.items():
        mine = sets[u]
        for v in ws:
            nv = sets.get(v)
            if nv:
                # upper rows only hold larger ids, so w > v holds automatically
                total += len(mine & nv)
    return total


def _adjacency_csr(g: EdgeList) -> sp.csr_matrix:
    n = g.n_vertices
    if not g.edges:
        return sp.csr_matrix((n, n), dtype=np.int64)
    e = np.asarray(g.edges, dtype=np.int64)
    r = np.concatenate([e[:, 0], e[:, 1]])
    c = np.concatenate([e[:, 1], e[:, 0]])
    return sp.csr_matrix((np.ones(r.size, dtype=np.int64), (r, c)), shape=(n, n))


def cohen_reference(g: EdgeList) -> int:
    """``sum((L U) .* A) / 2`` on scipy sparse matrices."""
    a = _adjacency_csr(g)
    lower = sp.tril(a, k=-1, format="csr")
    upper = sp.triu(a, k=1, format="csr")
    closed = (lower @ upper).multiply(a)
    s = int(closed.sum())
    if s % 2:
        raise AssertionError("closed wedge total must be even")
    return s // 2


def nppf_oracle_adjacency(g: EdgeList, key: Optional[Callable[[int], object]] = None) -> int:
    """``sum_r C(d_r, 2)`` over upper-orientation rows.

    ``key`` orders vertices (default numeric); pass the encoded byte form to
    model another vertex encoding.
    """
    return sum(len(ws) * (len(ws) - 1) // 2 for ws in _upper_rows(g, key).values())


def nppf_oracle_adj_incidence(g: EdgeList) -> int:
    """Pairs of lower-adjacency ``(v, v1)`` and incidence ``(v, [v2, v3])`` with ``v1 < v2``."""
    lower: dict[int, list[int]] = {}
    incident: dict[int, list[int]] = {}
    for u, w in g.edges:
        lower.setdefault(w, []).append(u)
        incident.setdefault(u, []).append(u)
        incident.setdefault(w, []).append(u)
    total = 0
    for v, v1s in lower.items():
        v1s.sort()
        for v2 in incident[v]:
            total += bisect_left(v1s, v2)
    return total


def nppf_adj_incidence_double_loop(g: EdgeList) -> int:
    """Literal double loop; slow, for cross-checking small graphs."""
    total = 0
    for v in range(g.n_vertices):
        a_row = [u for u, w in g.edges if w == v]
        e_row = [(u, w) for u, w in g.edges if v in (u, w)]
        for v1 in a_row:
            for v2, _ in e_row:
                if v1 < v2:
                    total += 1
    return total


def adj_incidence_emissions(g: EdgeList) -> Counter:
    """How many partial products each T key ``(v1, (v2, v3))`` receives."""
    lower: dict[int, list[int]] = {}
    incident: dict[int, list[tuple[int, int]]] = {}
    for u, w in g.edges:
        lower.setdefault(w, []).append(u)
        incident.setdefault(u, []).append((u, w))
        incident.setdefault(w, []).append((u, w))
    hits: Counter = Counter()
    for v, v1s in lower.items():
        for v1 in v1s:
            for edge in incident[v]:
                if v1 < edge[0]:
                    hits[(v1, edge)] += 1
    return hits


def wedge_keys_upper(g: EdgeList) -> set[tuple[int, int]]:
    """Keys ``(c, c')`` hit by at least one upper-row wedge."""
    keys = set()
    for ws in _upper_rows(g).values():
        for i, c in enumerate(ws):
            for d in ws[i + 1:]:
                keys.add((c, d))
    return keys


@dataclass(frozen=True)
class SkewReport:
    degree_histogram: dict[int, int]
    max_degree: int
    mean_degree: float
    per_tablet_load: tuple[int, ...]
    imbalance_ratio: float

    @property
    def total_load(self) -> int:
        return sum(self.per_tablet_load)


def skew_report(g: EdgeList, splits: Sequence[int], threshold: Optional[int] = None) -> SkewReport:
    """Per-tablet outer-product wedge load under vertex-id ``splits``.

    ``splits`` are inclusive last vertex ids of every tablet but the last.
    Rows with more than ``threshold`` upper entries are left out of the load,
    as the hybrid multiply sends them to the inner product.
    """
    deg = g.degrees()
    hist = Counter(deg)
    loads = [0] * (len(splits) + 1)
    for u, ws in _upper_rows(g).items():
        d = len(ws)
        if threshold is not None and d > threshold:
            continue
        loads[bisect_left(splits, u)] += d * (d - 1) // 2
    mean_load = sum(loads) / len(loads)
    ratio = max(loads) / mean_load if mean_load else 1.0
    n = g.n_vertices
    return SkewReport(
        degree_histogram=dict(sorted(hist.items())),
        max_degree=max(deg, default=0),
        mean_degree=(2 * g.nedges / n) if n else 0.0,
        per_tablet_load=tuple(loads),
        imbalance_ratio=ratio,
    )
