"""Row-granular split points balancing entry counts across tablets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from bisect import bisect_left
from typing import Iterable, Sequence

import numpy as np

from .combiners import Pair


@dataclass(frozen=True)
class SplitPoints:
    """Inclusive end rows of every tablet but the last.

    ``n`` boundaries give ``n + 1`` tablets; tablet ``i`` holds the rows in
    ``(boundaries[i-1], boundaries[i]]``.
    """

    boundaries: tuple[bytes, ...] = ()

    def __post_init__(self) -> None:
        b = tuple(self.boundaries)
        object.__setattr__(self, "boundaries", b)
        for lo, hi in zip(b, b[1:]):
            if not lo < hi:
                raise ValueError("split boundaries must be strictly increasing")

    def __len__(self) -> int:
        return len(self.boundaries)

    @property
    def n_tablets(self) -> int:
        return len(self.boundaries) + 1

    def tablet_of(self, row: bytes) -> int:
        return bisect_left(self.boundaries, row)


def row_counts(entries: Iterable[Pair]) -> tuple[list[bytes], list[int]]:
    """Distinct rows of a sorted stream and the number of entries in each."""
    rows: list[bytes] = []
    counts: list[int] = []
    last = None
    for (row, _), _ in entries:
        if row == last:
            counts[-1] += 1
        else:
            rows.append(row)
            counts.append(1)
            last = row
    return rows, counts


def compute_equal_splits(entries: Iterable[Pair], n_tablets: int) -> SplitPoints:
    """Choose split rows so tablets hold roughly equal numbers of entries.

    Rows are never divided.  Every tablet ends up within one maximal row of
    ``total / n_tablets`` entries, and the spread between the fullest and
    emptiest tablet is at most one maximal row whenever such a partition
    exists (it is searched for exactly; otherwise the nearest-cut partition
    is used).
    """
    if n_tablets < 1:
        raise ValueError(f"n_tablets must be >= 1, got {n_tablets}")
    rows, counts = row_counts(entries)
    return splits_from_counts(rows, counts, n_tablets)


def splits_from_counts(rows: Sequence[bytes], counts: Sequence[int], n_tablets: int) -> SplitPoints:
    if n_tablets < 1:
        raise ValueError(f"n_tablets must be >= 1, got {n_tablets}")
    if n_tablets == 1 or len(rows) <= 1:
        return SplitPoints(())
    cuts = _balanced_cuts(counts, n_tablets)
    if cuts is None:
        cuts = _nearest_cuts(counts, n_tablets)
    return SplitPoints(tuple(rows[c - 1] for c in cuts))


def _nearest_cuts(counts: Sequence[int], n: int) -> list[int]:
    prefix = np.concatenate(([0], np.cumsum(counts)))
    total = int(prefix[-1])
    cuts: list[int] = []
    for k in range(1, n):
        target = total * k / n
        i = int(np.searchsorted(prefix, target))
        if i > 0 and (i >= len(prefix) or target - prefix[i - 1] <= prefix[i] - target):
            i -= 1
        lo = cuts[-1] + 1 if cuts else 1
        i = max(i, lo)
        if i >= len(counts):
            break
        cuts.append(i)
    return cuts


def _balanced_cuts(counts: Sequence[int], n: int) -> list[int] | None:
    """Search for a partition whose part sizes all lie in [lo, lo + max_row].

    ``lo`` is scanned downward from the ideal size; for each window a
    reachability sweep over prefix sums decides feasibility for every part
    count up to ``n``.
    """
    prefix = np.concatenate(([0], np.cumsum(np.asarray(counts, dtype=np.int64))))
    nrows = len(counts)
    total = int(prefix[-1])
    widest = int(max(counts))
    ideal = total / n
    top = math.floor(ideal)
    bottom = max(1, math.ceil(ideal - widest))
    idx = np.arange(nrows + 1)
    for lo in range(top, bottom - 1, -1):
        hi = lo + widest
        # part ending at prefix i may start at any j with prefix[i]-hi <= prefix[j] <= prefix[i]-lo
        jlo = np.searchsorted(prefix, prefix - hi, side="left")
        jhi = np.minimum(np.searchsorted(prefix, prefix - lo, side="right") - 1, idx - 1)
        reach = np.zeros(nrows + 1, dtype=bool)
        reach[0] = True
        layers = [reach]
        best = None
        for k in range(1, n + 1):
            csum = np.concatenate(([0], np.cumsum(layers[-1])))
            ok = jhi >= jlo
            cnt = np.where(ok, csum[np.maximum(jhi, 0) + 1] - csum[jlo], 0)
            nxt = cnt > 0
            nxt[0] = False
            layers.append(nxt)
            if nxt[nrows]:
                best = k
            if not nxt.any():
                break
        if best is None:
            continue
        return _backtrack(layers, prefix, best, lo, hi, ideal)
    return None


def _backtrack(layers, prefix, k, lo, hi, ideal) -> list[int]:
    cuts: list[int] = []
    i = len(prefix) - 1
    while k > 1:
        cand = [
            j for j in range(i - 1, 0, -1)
            if layers[k - 1][j] and lo <= prefix[i] - prefix[j] <= hi
        ]
        j = min(cand, key=lambda j: (abs(prefix[i] - prefix[j] - ideal), -j))
        cuts.append(j)
        i = j
        k -= 1
    return sorted(cuts)
