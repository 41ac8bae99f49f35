"""Brute-force references for tests: sampled ranges, exhaustive cell classification
and an RK4 integrator for the two-state kinetics model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapExceeded, DomainViolation
from .expr import Expr, eval_real
from .interval import Interval, IntervalBox
from .ism import IsmVector, ism_cell
from .setinv import Verdict

DEFAULT_CELL_CAP = 1_000_000


@dataclass(frozen=True)
class SampledRange:
    interval: Interval
    samples_per_dim: int


def tensor_grid(X: IntervalBox, k: int) -> np.ndarray:
    """``k`` points per coordinate including both endpoints, shape ``(n, k, ..., k)``."""
    axes = [np.linspace(c.lo, c.hi, k) for c in X]
    return np.stack(np.meshgrid(*axes, indexing="ij"))


def sampled_range(e: Expr, X: IntervalBox, k: int, output: int = 0) -> SampledRange:
    if k < 2:
        raise ValueError("need at least two samples per coordinate")
    with np.errstate(all="ignore"):
        y = eval_real(e, tensor_grid(X, k))[output]
    if not np.all(np.isfinite(y)):
        raise DomainViolation("sample", Interval(float(np.nanmin(y)), float(np.nanmax(y))))
    return SampledRange(Interval(float(y.min()), float(y.max())), k)


def enumerate_cells(A: IsmVector | Sequence, Y: Sequence[Interval], cap: int = DEFAULT_CELL_CAP) -> np.ndarray:
    """Verdict for every grid cell, one :func:`ism_cell` sum per cell and output.

    ``A[m]`` is tested against ``Y[m]``.  This is the direct method the
    staircase construction avoids; it exists only as ground truth.
    """
    if len(A) != len(Y):
        raise ValueError("need one measurement interval per model")
    n, N = A[0].n_x, A[0].N
    if N ** n > cap:
        raise CapExceeded(f"{N}^{n} cells exceed the cap of {cap}")
    out = np.empty((N,) * n, dtype=object)
    for j in np.ndindex(*out.shape):
        inside, outside = True, False
        for model, y in zip(A, Y):
            c = ism_cell(model, j)
            finite = math.isfinite(c.lo) and math.isfinite(c.hi)
            inside &= finite and c.is_subset(y)
            outside |= finite and (c.hi < y.lo or c.lo > y.hi)
        out[j] = Verdict.EXCLUDED if outside else (Verdict.INTERIOR if inside else Verdict.INDETERMINATE)
    return out


def _kinetics_matrix(x) -> np.ndarray:
    x1, x2, x3 = x
    return np.array([[-(x1 + x3), x2], [x1, -x2]], dtype=float)


def integrate_kinetics(x: Sequence[float], t_end: float, steps: int = 10_000) -> float:
    """RK4 for z1' = -(x1+x3) z1 + x2 z2, z2' = x1 z1 - x2 z2 from z(0) = (1, 0); returns z2(t_end)."""
    return float(integrate_kinetics_state(x, t_end, steps)[1])


def integrate_kinetics_state(x: Sequence[float], t_end: float, steps: int = 10_000) -> np.ndarray:
    """Fixed-step RK4 state at ``t_end``.

    For a linear system ``z' = M z`` one RK4 step is multiplication by
    ``I + hM + (hM)^2/2 + (hM)^3/6 + (hM)^4/24``, so the steps are applied as
    a matrix power.
    """
    if steps < 100:
        raise ValueError("use at least 100 steps")
    hM = (t_end / steps) * _kinetics_matrix(x)
    step = np.eye(2)
    term = np.eye(2)
    for k in range(1, 5):
        term = term @ hM / k
        step = step + term
    return np.linalg.matrix_power(step, steps) @ np.array([1.0, 0.0])


def kinetics_sigma(x: Sequence[float]) -> float:
    x1, x2, x3 = x
    s2 = x1 * x1 + x2 * x2 + x3 * x3 + 2 * x1 * x2 + 2 * x1 * x3 - 2 * x2 * x3
    return math.sqrt(max(s2, 0.0))


def closed_form_output(x: Sequence[float], t: float) -> float:
    x1, x2, x3 = x
    rho = x1 + x2 + x3
    sigma = kinetics_sigma(x)
    decay = math.exp(-t * rho / 2)
    if sigma * t < 1e-8:
        # sinh(u)/u -> 1
        return decay * x1 * t
    return decay * x1 * 2.0 * math.sinh(t * sigma / 2) / sigma


def enclosure_excess(model, e: Expr, k: int, output: int = 0) -> float:
    """Largest vertical gap between the ISM enclosure graph and ``f`` over a ``k``-per-axis sample.

    Each sample ``x`` contributes ``max(f(x) - lo(x), hi(x) - f(x))`` where
    ``[lo(x), hi(x)]`` is the model value at ``x``.  Unlike the gap between
    ranges, this sees the per-cell width even where the model range is exact.
    """
    grid = model.grid
    pts = tensor_grid(grid.domain, k).reshape(grid.n_x, -1)
    with np.errstate(all="ignore"):
        y = eval_real(e, pts)[output]
    idx = grid.locate(pts)
    rows = np.arange(grid.n_x)[:, None]
    lo = model.A.lo[rows, idx].sum(axis=0)
    hi = model.A.hi[rows, idx].sum(axis=0)
    return float(np.max(np.maximum(y - lo, hi - y)))
