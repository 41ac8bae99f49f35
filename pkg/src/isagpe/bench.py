"""Experiment drivers producing plot data: enclosure overestimation, a one-pass
cell classification, and iteration counts of the two set-inversion engines."""

from __future__ import annotations

import time
from typing import Iterable

import numpy as np

from .errors import BudgetExceeded
from .expr import parse
from .interval import Interval, IntervalBox, hausdorff_1d
from .ism import Grid, ism_of_expr
from .oracle import sampled_range
from .setinv import GpeProblem, Measurement, classify_cells, solve

FIG2_EXPRESSION = "exp(sin(x1) + sin(x2)*cos(x2))"
FIG2_XBARS = (1.0, 5.0, 10.0, 15.0, 20.0)
FIG2_NS = (1, 10, 100)

CUBIC_EXPRESSION = "x1^3 + x2^3"


def hausdorff_rows(Ns: Iterable[int] = FIG2_NS, xbars: Iterable[float] = FIG2_XBARS, samples: int = 400):
    """``(N, xbar2, d_H)`` between the sampled range and the model range over ``[0,1] x [0,xbar2]``."""
    e = parse(FIG2_EXPRESSION)
    rows = []
    for xbar in xbars:
        X = IntervalBox.from_bounds([0.0, 0.0], [1.0, float(xbar)])
        inner = sampled_range(e, X, samples).interval
        for N in Ns:
            outer = ism_of_expr(e, Grid(X, int(N)))[0].range()
            rows.append((int(N), float(xbar), hausdorff_1d(inner, outer)))
    return rows


def cubic_problem(N: int = 20, half_width: float = 3.0, Y: Interval = Interval(-2.0, 2.0), n_J_max=None) -> GpeProblem:
    e = parse(CUBIC_EXPRESSION)
    X = IntervalBox.from_bounds([-half_width] * 2, [half_width] * 2)
    return GpeProblem(e, X, [Measurement(0, Y)], epsilon=1.0, engine="ism", N=N, n_J_max=n_J_max)


def cell_rows(p: GpeProblem):
    """``(class, lo_1, hi_1, ..., lo_n, hi_n)`` for every cell of one ISM pass over the domain."""
    verdict = classify_cells(p)
    b = Grid(p.domain, p.N).boundaries
    rows = []
    for j in np.ndindex(*verdict.shape):
        row = [verdict[j].value]
        for i, ji in enumerate(j):
            row += [float(b[i, ji]), float(b[i, ji + 1])]
        rows.append(tuple(row))
    return rows


def iteration_rows(p: GpeProblem, epsilons: Iterable[float], Ns: Iterable[int] = (2, 10, 20)):
    """``(engine, N, epsilon, iterations, boundary_count, wall_ms)`` for SIVIA and each ISM grid size."""
    configs = [("sivia", None)] + [("ism", int(N)) for N in Ns]
    rows = []
    for eps in epsilons:
        for engine, N in configs:
            q = p.replace(epsilon=float(eps), engine=engine, N=N or p.N)
            start = time.perf_counter()
            try:
                sp = solve(q)
            except BudgetExceeded as err:
                sp = err.partial
            wall = 1000.0 * (time.perf_counter() - start)
            rows.append((engine, N, float(eps), sp.stats["iterations"], len(sp.boundary), wall))
    return rows
