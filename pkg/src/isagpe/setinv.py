"""Set inversion for guaranteed parameter estimation.

Two engines compute inner and boundary subpavings of

    X_e = {x in X0 : f_k(x) in Y_k for every measurement k}

* :func:`sivia` bisects boxes and bounds ``f`` with the natural interval
  extension.
* :func:`ism_setinv` grids each box, builds one interval superposition model
  per model output, removes cells with the staircase covers and classifies
  the remaining cells.  Undecided cells become new boxes.

Both process boxes first-in first-out.  Boxes are dequeued in chunks and
bounded together in one vectorised pass, but children are appended in exactly
the order a one-box-at-a-time loop would produce, so results and iteration
counts are those of the sequential algorithm.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BudgetExceeded
from .expr import Expr, eval_interval_arrays, eval_real
from .interval import Interval, IntervalArray, IntervalBox
from .ism import cell_table, coeffs_of_expr, grid_boundaries, range_of
from .staircase import DEFAULT_N_J_MAX, build_staircases, excluded_mask, sort_rows

DEFAULT_BUDGET = 1_000_000
ENGINES = ("sivia", "ism")


class Verdict(enum.Enum):
    INTERIOR = "interior"
    EXCLUDED = "excluded"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class Measurement:
    output: int
    Y: Interval

    def __post_init__(self):
        if self.Y.is_empty:
            raise ValueError("measurement interval is empty")


@dataclass(frozen=True)
class GpeProblem:
    model: Expr
    domain: IntervalBox
    measurements: tuple
    epsilon: float
    engine: str = "sivia"
    N: int = 2
    n_J_max: int | None = DEFAULT_N_J_MAX
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        object.__setattr__(self, "measurements", tuple(self.measurements))
        if not self.measurements:
            raise ValueError("at least one measurement is required")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}")
        if self.N < 1:
            raise ValueError("N must be a positive integer")
        if len(self.domain) != self.model.n_vars:
            raise ValueError("domain dimension does not match the model")
        for m in self.measurements:
            if not 0 <= m.output < self.model.n_outputs:
                raise ValueError(f"measurement refers to missing output {m.output}")

    def replace(self, **changes) -> "GpeProblem":
        fields = dict(
            model=self.model, domain=self.domain, measurements=self.measurements,
            epsilon=self.epsilon, engine=self.engine, N=self.N, n_J_max=self.n_J_max,
            budget=self.budget,
        )
        fields.update(changes)
        return GpeProblem(**fields)

    @property
    def Y_lo(self) -> np.ndarray:
        return np.array([m.Y.lo for m in self.measurements])

    @property
    def Y_hi(self) -> np.ndarray:
        return np.array([m.Y.hi for m in self.measurements])

    def measured_model(self) -> Expr:
        """The model restricted to the measured outputs, one output per measurement."""
        return self.model.select([m.output for m in self.measurements])

    def satisfied(self, points) -> np.ndarray:
        """Which points (shape ``(n_x, ...)``) meet every measurement constraint."""
        y = eval_real(self.measured_model(), points)
        shape = (-1,) + (1,) * (y.ndim - 1)
        return np.all((y >= self.Y_lo.reshape(shape)) & (y <= self.Y_hi.reshape(shape)), axis=0)


@dataclass
class Subpaving:
    interior: list = field(default_factory=list)
    boundary: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    def boxes(self):
        for b in self.interior:
            yield "interior", b
        for b in self.boundary:
            yield "boundary", b

    def canonical(self) -> "Subpaving":
        key = lambda b: tuple(b.lo) + tuple(b.hi)
        return Subpaving(sorted(self.interior, key=key), sorted(self.boundary, key=key), dict(self.stats))

    def contains(self, x) -> str | None:
        """Class of the first box containing ``x``, or None."""
        for cls, b in self.boxes():
            if b.contains(x):
                return cls
        return None

    def to_json(self) -> dict:
        return {
            "interior": [b.to_json() for b in self.interior],
            "boundary": [b.to_json() for b in self.boundary],
            "stats": self.stats,
        }

    @classmethod
    def from_json(cls, data) -> "Subpaving":
        return cls(
            [IntervalBox.from_json(b) for b in data["interior"]],
            [IntervalBox.from_json(b) for b in data["boundary"]],
            dict(data.get("stats", {})),
        )

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        n = len(self.interior[0]) if self.interior else (len(self.boundary[0]) if self.boundary else 0)
        header = ["class"]
        for i in range(1, n + 1):
            header += [f"lo_{i}", f"hi_{i}"]
        writer.writerow(header)
        for cls, box in self.boxes():
            row = [cls]
            for c in box:
                row += [f"{c.lo:.17g}", f"{c.hi:.17g}"]
            writer.writerow(row)
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Subpaving":
        reader = csv.reader(io.StringIO(text))
        next(reader)
        sp = cls()
        for row in reader:
            vals = [float(v) for v in row[1:]]
            box = IntervalBox.from_bounds(vals[0::2], vals[1::2])
            (sp.interior if row[0] == "interior" else sp.boundary).append(box)
        return sp

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)


# ---------------------------------------------------------------------------
# Shared pieces
# ---------------------------------------------------------------------------


def verdicts(lo, hi, Y_lo, Y_hi):
    """Membership tests over stacked enclosures of shape ``(M, ...)``.

    Returns ``(interior, excluded)`` masks; everything else is indeterminate.
    Non-finite enclosures are never interior or excluded.
    """
    shape = (-1,) + (1,) * (np.ndim(lo) - 1)
    Y_lo = np.asarray(Y_lo).reshape(shape)
    Y_hi = np.asarray(Y_hi).reshape(shape)
    finite = np.isfinite(lo) & np.isfinite(hi)
    inside = finite & (lo >= Y_lo) & (hi <= Y_hi)
    outside = finite & ((hi < Y_lo) | (lo > Y_hi))
    interior = np.all(inside, axis=0)
    excluded = np.any(outside, axis=0)
    return interior & ~excluded, excluded


def _verdict(interior: bool, excluded: bool) -> Verdict:
    if excluded:
        return Verdict.EXCLUDED
    if interior:
        return Verdict.INTERIOR
    return Verdict.INDETERMINATE


def box_diam(lo, hi) -> np.ndarray:
    return np.max(np.asarray(hi) - np.asarray(lo), axis=-1)


def bisect(X: IntervalBox) -> tuple:
    """Split at the midpoint of the widest coordinate (lowest index on ties)."""
    lo, hi = X.lo, X.hi
    children = _bisect_arrays(lo, hi)
    if children is None:
        raise ValueError(f"cannot bisect degenerate box {X}")
    (l1, h1), (l2, h2) = children
    return IntervalBox.from_bounds(l1, h1), IntervalBox.from_bounds(l2, h2)


def _bisect_arrays(lo, hi):
    w = hi - lo
    k = int(np.argmax(w))
    m = 0.5 * lo[k] + 0.5 * hi[k]
    if not lo[k] < m < hi[k]:
        return None
    h1 = hi.copy()
    h1[k] = m
    l2 = lo.copy()
    l2[k] = m
    return (lo, h1), (l2, hi)


def classify_box(p: GpeProblem, X: IntervalBox, bound: str = "interval") -> Verdict:
    """Membership tests on one box, bounding with interval arithmetic or an ISM range."""
    lo, hi = _enclose(p, X.lo[:, None], X.hi[:, None], bound)
    interior, excluded = verdicts(lo, hi, p.Y_lo, p.Y_hi)
    return _verdict(bool(interior[0]), bool(excluded[0]))


def _enclose(p: GpeProblem, lo, hi, bound: str):
    """Enclosures for each measurement over boxes given column-wise, shape ``(M, B)``."""
    model = p.measured_model()
    if bound == "interval":
        outs = eval_interval_arrays(model, lo, hi, strict=False)
    elif bound == "ism":
        bounds = grid_boundaries(lo.T, hi.T, p.N)
        outs = [range_of(C) for C in coeffs_of_expr(model, bounds, strict=False)]
    else:
        raise ValueError(f"unknown bounding strategy {bound!r}")
    return np.stack([o.lo for o in outs]), np.stack([o.hi for o in outs])


class _Run:
    """Queue, accumulators and counters shared by both engines."""

    def __init__(self, p: GpeProblem, engine: str):
        self.p = p
        self.queue = deque([(p.domain.lo, p.domain.hi)])
        self.interior: list = []
        self.boundary: list = []
        self.iterations = 0
        self.tested = 0
        self.engine = engine
        self.start = time.perf_counter()

    def take_chunk(self):
        room = self.p.budget - self.iterations
        k = min(len(self.queue), room)
        chunk = [self.queue.popleft() for _ in range(k)]
        self.iterations += k
        return chunk

    def undecided(self, lo, hi, splitter):
        """Route an indeterminate box: boundary if small enough, else split."""
        if np.max(hi - lo) <= self.p.epsilon:
            self.boundary.append(IntervalBox.from_bounds(lo, hi))
            return
        children = splitter(lo, hi)
        if children is None:
            self.boundary.append(IntervalBox.from_bounds(lo, hi))
        else:
            self.queue.extend(children)

    def finish(self) -> Subpaving:
        complete = not self.queue
        sp = Subpaving(
            self.interior,
            self.boundary + [IntervalBox.from_bounds(lo, hi) for lo, hi in self.queue],
            {
                "engine": self.engine,
                "N": self.p.N if self.engine == "ism" else None,
                "epsilon": self.p.epsilon,
                "iterations": self.iterations,
                "boxes_tested": self.tested,
                "interior_count": len(self.interior),
                "boundary_count": len(self.boundary) + len(self.queue),
                "wall_ms": 1000.0 * (time.perf_counter() - self.start),
                "complete": complete,
            },
        )
        if not complete:
            raise BudgetExceeded(
                f"iteration budget {self.p.budget} exhausted with {len(self.queue)} boxes queued",
                partial=sp,
            )
        return sp


# ---------------------------------------------------------------------------
# Engines
# ---------------------------------------------------------------------------


def sivia(p: GpeProblem, chunk_size: int = 4096) -> Subpaving:
    """Bisection with natural-interval-extension membership tests."""
    run = _Run(p, "sivia")
    while run.queue and run.iterations < p.budget:
        chunk = run.take_chunk()
        for start in range(0, len(chunk), chunk_size):
            part = chunk[start:start + chunk_size]
            lo = np.stack([c[0] for c in part], axis=1)
            hi = np.stack([c[1] for c in part], axis=1)
            e_lo, e_hi = _enclose(p, lo, hi, "interval")
            interior, excluded = verdicts(e_lo, e_hi, p.Y_lo, p.Y_hi)
            run.tested += len(part)
            for b, (blo, bhi) in enumerate(part):
                if excluded[b]:
                    continue
                if interior[b]:
                    run.interior.append(IntervalBox.from_bounds(blo, bhi))
                else:
                    run.undecided(blo, bhi, _bisect_arrays)
    return run.finish()


def _cell_bounds(bounds_b, j):
    n = bounds_b.shape[0]
    rows = np.arange(n)
    j = np.asarray(j)
    return bounds_b[rows, j], bounds_b[rows, j + 1]


def ism_setinv(p: GpeProblem, chunk_size: int = 512) -> Subpaving:
    """Set inversion driven by interval superposition models and staircase pruning."""
    run = _Run(p, "ism")
    model = p.measured_model()
    n, N = model.n_vars, p.N
    Y = [m.Y for m in p.measurements]
    cell_shape = (N,) * n
    all_idx = list(np.ndindex(*cell_shape))

    # undecided cells become boxes gridded afresh; a single-cell grid would
    # reproduce the same box, so N == 1 bisects instead
    splitter = _bisect_arrays if N == 1 else (lambda lo, hi: [(lo, hi)])

    while run.queue and run.iterations < p.budget:
        chunk = run.take_chunk()
        for start in range(0, len(chunk), chunk_size):
            part = chunk[start:start + chunk_size]
            lo = np.stack([c[0] for c in part])
            hi = np.stack([c[1] for c in part])
            bounds = grid_boundaries(lo, hi, N)  # (B, n, N+1)
            coeffs = coeffs_of_expr(model, bounds, strict=False)
            tables = [cell_table(C) for C in coeffs]  # each (B, N, ..., N)
            t_lo = np.stack([t.lo for t in tables], axis=1)  # (B, M, N..N)
            t_hi = np.stack([t.hi for t in tables], axis=1)
            for b, (blo, bhi) in enumerate(part):
                finite = all(np.all(C.finite()[b]) for C in coeffs)
                if not finite:
                    # a domain violation somewhere in the box: split it plainly
                    run.tested += 1
                    run.undecided(blo, bhi, _bisect_arrays)
                    continue
                survive = np.ones(cell_shape, dtype=bool)
                for m, C in enumerate(coeffs):
                    Cb = C[b]
                    covers = build_staircases(Cb, sort_rows(Cb), Y[m], p.n_J_max)
                    survive &= ~excluded_mask(covers)
                interior, excluded = verdicts(t_lo[b], t_hi[b], p.Y_lo, p.Y_hi)
                excluded |= ~survive
                run.tested += int(survive.sum())
                if np.all(excluded):
                    continue
                if np.all(interior):
                    run.interior.append(IntervalBox.from_bounds(blo, bhi))
                    continue
                for j in all_idx:
                    if excluded[j]:
                        continue
                    clo, chi = _cell_bounds(bounds[b], j)
                    if interior[j]:
                        run.interior.append(IntervalBox.from_bounds(clo, chi))
                    else:
                        run.undecided(clo, chi, splitter)
    return run.finish()


def solve(p: GpeProblem) -> Subpaving:
    return sivia(p) if p.engine == "sivia" else ism_setinv(p)


def classify_cells(p: GpeProblem, X: IntervalBox | None = None) -> np.ndarray:
    """One ISM pass over ``X`` (default: the problem domain): a verdict per grid cell.

    Returns an object array of :class:`Verdict` with one axis per coordinate.
    Cells removed by the staircases are reported as excluded.
    """
    X = X or p.domain
    model = p.measured_model()
    bounds = grid_boundaries(X.lo, X.hi, p.N)
    coeffs = coeffs_of_expr(model, bounds, strict=False)
    shape = (p.N,) * model.n_vars
    survive = np.ones(shape, dtype=bool)
    for m, C in enumerate(coeffs):
        covers = build_staircases(C, sort_rows(C), p.measurements[m].Y, p.n_J_max)
        survive &= ~excluded_mask(covers)
    tables = [cell_table(C) for C in coeffs]
    interior, excluded = verdicts(
        np.stack([t.lo for t in tables]), np.stack([t.hi for t in tables]), p.Y_lo, p.Y_hi
    )
    excluded |= ~survive
    out = np.empty(shape, dtype=object)
    for j in np.ndindex(*shape):
        out[j] = _verdict(bool(interior[j]), bool(excluded[j]))
    return out
