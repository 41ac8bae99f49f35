"""Intersecting an interval superposition model with an interval.

Each row of the coefficient matrix is sorted twice: lower bounds in
decreasing order (``pi_lower``) and upper bounds in increasing order
(``pi_upper``).  In these sorted coordinates the cells whose enclosure lies
strictly above ``Y`` form a downward-closed set of rank vectors: if the
lower-bound sum at ranks ``r`` exceeds ``y_hi``, so does every ``r' <= r``.
The same holds for cells strictly below ``Y`` with upper bounds.  Each set is
therefore described exactly by its maximal elements ("corners"), and any
subset of corners still describes a sound under-approximation of it.

Orientation note: the corner tests here are ``sum(lower) > y_hi`` with
lower bounds sorted decreasing and ``sum(upper) < y_lo`` with upper bounds
sorted increasing.  With this pairing every cell dominated by a corner is
provably infeasible; pairing the increasing lower-bound sort with
``sum <= y_lo`` would not give that guarantee.

Sums are accumulated row by row with the same directed rounding as
:meth:`isagpe.ism.Ism.cell`, so the staircase test and the per-cell test agree
bit for bit.

Ranks and column indices are 0-based.  A corner ``c`` covers all rank
vectors ``r`` with ``r[i] <= c[i]`` for every row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .interval import Interval, IntervalArray
from .ism import Ism

DEFAULT_N_J_MAX = 64
DEFAULT_MAX_VISITS = 200_000


def _sum_down(a: float, b: float) -> float:
    s = a + b
    bp = s - a
    err = (a - (s - bp)) + (b - bp)
    if err < 0.0 or not math.isfinite(err):
        return math.nextafter(s, -math.inf)
    return s


@dataclass(frozen=True)
class RowPermutations:
    """``pi_lower[i][r]`` is the column holding the ``r``-th largest lower bound of row ``i``;
    ``pi_upper[i][r]`` the column with the ``r``-th smallest upper bound."""

    pi_lower: np.ndarray
    pi_upper: np.ndarray

    @property
    def rank_lower(self) -> np.ndarray:
        return _inverse(self.pi_lower)

    @property
    def rank_upper(self) -> np.ndarray:
        return _inverse(self.pi_upper)


def _inverse(perm: np.ndarray) -> np.ndarray:
    inv = np.empty_like(perm)
    rows = np.arange(perm.shape[0])[:, None]
    inv[rows, perm] = np.arange(perm.shape[1])[None, :]
    return inv


@dataclass(frozen=True)
class StaircaseCovers:
    above_corners: tuple
    below_corners: tuple
    perms: RowPermutations
    N: int
    complete: bool = True

    @property
    def n_x(self) -> int:
        return self.perms.pi_lower.shape[0]

    def to_json(self) -> dict:
        return {
            "corners_above": [list(map(int, c)) for c in self.above_corners],
            "corners_below": [list(map(int, c)) for c in self.below_corners],
            "perms": {
                "lower": self.perms.pi_lower.tolist(),
                "upper": self.perms.pi_upper.tolist(),
            },
        }


def _coeffs(A) -> IntervalArray:
    return A.A if isinstance(A, Ism) else A


def sort_rows(A) -> RowPermutations:
    """Stable per-row sorts; equal bounds keep their column order."""
    C = _coeffs(A)
    pi_lower = np.argsort(-C.lo, axis=-1, kind="stable")
    pi_upper = np.argsort(C.hi, axis=-1, kind="stable")
    return RowPermutations(pi_lower, pi_upper)


def _frontier(values: np.ndarray, threshold: float, limit: int, max_visits: int):
    """Maximal rank vectors ``r`` with ``sum_down(values[i, r[i]]) > threshold``.

    ``values`` must be non-increasing along each row.  Corners are produced in
    lexicographic order of their leading ranks.  Returns ``(corners, complete)``.
    """
    n, N = values.shape
    rows = [list(map(float, values[i])) for i in range(n)]
    last = rows[-1]
    corners: list[tuple] = []
    visits = 0

    def last_extent(acc: float) -> int:
        # largest m with sum_down(acc, last[m]) > threshold, or -1
        lo, hi = 0, N - 1
        if not _sum_down(acc, last[0]) > threshold:
            return -1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if _sum_down(acc, last[mid]) > threshold:
                lo = mid
            else:
                hi = mid - 1
        return lo

    def extent(prefix: list) -> int:
        acc = None
        for i, r in enumerate(prefix):
            acc = rows[i][r] if acc is None else _sum_down(acc, rows[i][r])
        if acc is None:
            return last_extent_first()
        return last_extent(acc)

    def last_extent_first() -> int:
        m = -1
        for r in range(N):
            if last[r] > threshold:
                m = r
            else:
                break
        return m

    if n == 1:
        m = last_extent_first()
        return ([(m,)] if m >= 0 else []), True

    def feasible_prefix(acc: float, depth: int) -> bool:
        # smallest completion uses rank 0 in every remaining row
        for i in range(depth, n):
            acc = _sum_down(acc, rows[i][0])
        return acc > threshold

    prefix = [0] * (n - 1)

    def walk(depth: int, acc) -> bool:
        nonlocal visits
        for r in range(N):
            a = rows[depth][r] if acc is None else _sum_down(acc, rows[depth][r])
            if not feasible_prefix(a, depth + 1):
                break
            prefix[depth] = r
            if depth < n - 2:
                if not walk(depth + 1, a):
                    return False
                continue
            visits += 1
            if visits > max_visits:
                return False
            m = last_extent(a)
            maximal = True
            for k in range(n - 1):
                if prefix[k] + 1 >= N:
                    continue
                bumped = list(prefix)
                bumped[k] += 1
                if extent(bumped) >= m:
                    maximal = False
                    break
            if maximal:
                corners.append(tuple(prefix) + (m,))
                if len(corners) >= limit:
                    return False
        return True

    complete = walk(0, None)
    return corners, complete


def build_staircases(
    A,
    perms: RowPermutations,
    Y: Interval,
    n_J_max: int | None = DEFAULT_N_J_MAX,
    max_visits: int = DEFAULT_MAX_VISITS,
) -> StaircaseCovers:
    """Corner sets of the cells lying strictly above and strictly below ``Y``.

    ``n_J_max=None`` enumerates the full frontiers, which makes the excluded
    set equal to the per-cell test.  A finite ``n_J_max`` keeps the first
    corners found; the result is still sound, only less selective.
    """
    if Y.is_empty:
        raise ValueError("measurement interval is empty")
    C = _coeffs(A)
    n, N = C.lo.shape
    limit = math.inf if n_J_max is None else int(n_J_max)
    if not (np.all(np.isfinite(C.lo)) and np.all(np.isfinite(C.hi))) or limit <= 0:
        return StaircaseCovers((), (), perms, N, complete=False)
    rows = np.arange(n)[:, None]
    lower_sorted = C.lo[rows, perms.pi_lower]
    upper_sorted = C.hi[rows, perms.pi_upper]
    above, ok_a = _frontier(lower_sorted, Y.hi, limit, max_visits)
    below, ok_b = _frontier(-upper_sorted, -Y.lo, limit, max_visits)
    return StaircaseCovers(tuple(above), tuple(below), perms, N, complete=ok_a and ok_b)


def _dominated(ranks: Sequence[int], corners) -> bool:
    return any(all(r <= c for r, c in zip(ranks, corner)) for corner in corners)


def cells_excluded(covers: StaircaseCovers, j: Sequence[int]) -> bool:
    """True when cell ``j`` (column indices) lies under some corner of either staircase."""
    rl = covers.perms.rank_lower
    ru = covers.perms.rank_upper
    ranks_l = [int(rl[i, ji]) for i, ji in enumerate(j)]
    ranks_u = [int(ru[i, ji]) for i, ji in enumerate(j)]
    return _dominated(ranks_l, covers.above_corners) or _dominated(ranks_u, covers.below_corners)


def _last_threshold(prefix_ranks, corners) -> int:
    t = -1
    for corner in corners:
        if corner[-1] > t and all(r <= c for r, c in zip(prefix_ranks, corner)):
            t = corner[-1]
    return t


def surviving_cells(covers: StaircaseCovers) -> Iterator[tuple]:
    """Cells not covered by either staircase, in lexicographic order of column indices.

    Per prefix of leading indices only two thresholds on the last coordinate
    are computed, so the excluded region is never enumerated box by box.
    """
    n, N = covers.n_x, covers.N
    rl = covers.perms.rank_lower
    ru = covers.perms.rank_upper
    for prefix in np.ndindex(*([N] * (n - 1))):
        pl = [int(rl[i, j]) for i, j in enumerate(prefix)]
        pu = [int(ru[i, j]) for i, j in enumerate(prefix)]
        t_above = _last_threshold(pl, covers.above_corners)
        t_below = _last_threshold(pu, covers.below_corners)
        for j in range(N):
            if rl[n - 1, j] > t_above and ru[n - 1, j] > t_below:
                yield tuple(int(v) for v in prefix) + (j,)


def excluded_mask(covers: StaircaseCovers) -> np.ndarray:
    """Boolean array over all cells (one axis per coordinate) marking excluded cells."""
    n, N = covers.n_x, covers.N
    mask = np.zeros((N,) * n, dtype=bool)
    for corners, ranks in (
        (covers.above_corners, covers.perms.rank_lower),
        (covers.below_corners, covers.perms.rank_upper),
    ):
        for corner in corners:
            hit = np.ones((N,) * n, dtype=bool)
            for i in range(n):
                shape = [1] * n
                shape[i] = N
                hit &= (ranks[i] <= corner[i]).reshape(shape)
            mask |= hit
    return mask
