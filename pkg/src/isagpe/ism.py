"""Interval superposition models (ISMs) and their arithmetic.

An ISM of ``f`` over a box ``X`` split into ``N`` equal pieces per coordinate
is an ``n_x x N`` matrix ``A`` of intervals.  At a point ``x`` lying in cell
``j_i`` along each coordinate the enclosure is the Minkowski sum
``A[0, j_0] + ... + A[n_x-1, j_{n_x-1}]``, so ``N**n_x`` pieces are described
by ``n_x * N`` stored intervals.

All rules work on coefficient arrays of shape ``(..., n_x, N)``; leading axes
batch independent models (one per box), which is how the set-inversion engine
builds many models at once.  Indices are 0-based throughout.

Composition rule for a univariate atom ``alpha`` applied to ``g = sum_i g_i``::

    a_i    central point in [L_i, U_i]            (L/U = row min/max)
    omega  = sum_i a_i
    C_i^j  = alpha(omega - a_i + A_i^j) - (n-1)/n * alpha(omega)
    r      >= |sum_i alpha(omega + d_i) - (n-1) alpha(omega) - alpha(omega + sum_i d_i)|
    C_k^j += r * [-1, 1]      for the widest row k

The remainder ``r`` uses the addition theorem for ``exp``.  For other atoms it
is the smaller of two sound bounds: the defect evaluated directly in interval
arithmetic, and a second-order bound ``max|alpha''| * sum_{i<k} m_i m_k`` with
``m_i = max(U_i - a_i, a_i - L_i)``.  The latter vanishes when at most one row
has non-zero width, which keeps separable models exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainViolation, GridMismatch, PointOutsideDomain
from .expr import Expr, fold, live_nodes
from .interval import Interval, IntervalArray, IntervalBox, _up


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------


def grid_boundaries(lo, hi, N: int) -> np.ndarray:
    """Cell boundaries of shape ``(..., n, N+1)`` for boxes ``[lo, hi]`` of shape ``(..., n)``.

    Boundary ``j`` is ``lo + j*h``; the last one is pinned to ``hi`` so the
    cells tile the box exactly.
    """
    lo = np.asarray(lo, dtype=float)[..., None]
    hi = np.asarray(hi, dtype=float)[..., None]
    j = np.arange(N + 1, dtype=float)
    b = lo + j * ((hi - lo) / N)
    b = np.minimum(b, hi)
    b[..., -1] = hi[..., 0]
    return b


@dataclass(frozen=True, eq=False)
class Grid:
    domain: IntervalBox
    N: int
    boundaries: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be a positive integer")
        if any(c.diam() <= 0 for c in self.domain):
            raise ValueError("grid domain has a degenerate coordinate")
        b = grid_boundaries(self.domain.lo, self.domain.hi, self.N)
        b.setflags(write=False)
        object.__setattr__(self, "boundaries", b)

    def __eq__(self, other):
        return isinstance(other, Grid) and self.N == other.N and self.domain == other.domain

    def __hash__(self):
        return hash((self.domain, self.N))

    @property
    def n_x(self) -> int:
        return len(self.domain)

    @property
    def h(self) -> np.ndarray:
        return self.domain.widths() / self.N

    def cell(self, i: int, j: int) -> Interval:
        return Interval(self.boundaries[i, j], self.boundaries[i, j + 1])

    def cell_box(self, j: Sequence[int]) -> IntervalBox:
        return IntervalBox(tuple(self.cell(i, ji) for i, ji in enumerate(j)))

    def locate(self, x) -> np.ndarray:
        """Cell index per coordinate; cells are half-open except the last one."""
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.n_x:
            raise ValueError(f"expected a point of dimension {self.n_x}")
        lo, hi = self.domain.lo, self.domain.hi
        xs = x.reshape(self.n_x, -1)
        if np.any(xs < lo[:, None]) or np.any(xs > hi[:, None]):
            raise PointOutsideDomain(f"point outside {self.domain}")
        idx = np.empty(xs.shape, dtype=int)
        for i in range(self.n_x):
            idx[i] = np.searchsorted(self.boundaries[i], xs[i], side="right") - 1
        np.clip(idx, 0, self.N - 1, out=idx)
        return idx.reshape(x.shape)


# ---------------------------------------------------------------------------
# Coefficient-array rules (batched)
# ---------------------------------------------------------------------------


def var_coeffs(bounds: np.ndarray, i: int) -> IntervalArray:
    """Row ``i`` holds the grid cells, all other rows are zero."""
    n, N = bounds.shape[-2], bounds.shape[-1] - 1
    lo = np.zeros(bounds.shape[:-2] + (n, N))
    hi = np.zeros_like(lo)
    lo[..., i, :] = bounds[..., i, :-1]
    hi[..., i, :] = bounds[..., i, 1:]
    return IntervalArray(lo, hi)


def const_coeffs(shape, c_lo: float, c_hi: float) -> IntervalArray:
    lo = np.zeros(shape)
    hi = np.zeros(shape)
    lo[..., 0, :] = c_lo
    hi[..., 0, :] = c_hi
    return IntervalArray(lo, hi)


def row_bounds(A: IntervalArray):
    """Per-row ``(L, U)``: min of lower and max of upper bounds, shape ``(..., n)``."""
    return A.lo.min(axis=-1), A.hi.max(axis=-1)


def range_of(A: IntervalArray) -> IntervalArray:
    L, U = row_bounds(A)
    return IntervalArray(L, U).sum(axis=-1)


def widest_row(A: IntervalArray) -> np.ndarray:
    """Row with the largest total width; ties go to the smallest index."""
    return np.argmax((A.hi - A.lo).sum(axis=-1), axis=-1)


def _add_remainder(C: IntervalArray, k, r) -> IntervalArray:
    n = C.lo.shape[-2]
    onehot = np.arange(n) == np.asarray(k)[..., None]  # (..., n)
    pad = np.where(onehot, np.asarray(r, dtype=float)[..., None], 0.0)[..., None]
    return C + IntervalArray(-pad, pad)


def _inv_count(n: int) -> IntervalArray:
    """Enclosure of ``1/n``."""
    q = 1.0 / n
    return IntervalArray(np.nextafter(q, -np.inf), np.nextafter(q, np.inf))


def _fraction(n: int) -> IntervalArray:
    """Enclosure of ``(n-1)/n``."""
    q = (n - 1) / n
    if q == 0.0:
        return IntervalArray(0.0, 0.0)
    return IntervalArray(np.nextafter(q, -np.inf), np.nextafter(q, np.inf))


_DOMAIN_OK = {
    "log": lambda lam, mu: lam > 0.0,
    "sqrt": lambda lam, mu: lam >= 0.0,
    "recip": lambda lam, mu: (lam > 0.0) | (mu < 0.0),
}


def _second_derivative(tag: str, R: IntervalArray) -> IntervalArray:
    if tag == "exp":
        return R.exp()
    if tag == "sin":
        return -R.sin()
    if tag == "cos":
        return -R.cos()
    if tag == "log":
        return -(R.pow(2, strict=False).recip(strict=False))
    if tag == "recip":
        return R.pow(3, strict=False).recip(strict=False).scale(2.0)
    if tag == "sqrt":
        return -((R.sqrt(strict=False) * R).recip(strict=False).scale(0.25))
    raise ValueError(f"unknown atom {tag!r}")


def _clamp(X: IntervalArray, lam, mu) -> IntervalArray:
    return IntervalArray(np.maximum(X.lo, lam), np.minimum(X.hi, mu))


def _central_points(tag: str, L, U):
    if tag == "exp":
        # log((e^U + e^L)/2), written to avoid overflow
        with np.errstate(over="ignore", invalid="ignore"):
            a = U + np.log1p(np.exp(L - U)) - np.log(2.0)
    else:
        a = 0.5 * L + 0.5 * U
    return np.clip(a, L, U)


def _exp_remainder(L, U, a, Omega: IntervalArray):
    """``e^omega (prod(1+s_i) - sum(s_i) - 1)`` with the addition-theorem ``s_i``."""
    up = (IntervalArray(U) - a).exp() - 1.0
    down = 1.0 - (IntervalArray(L) - a).exp()
    s = np.maximum(np.maximum(up.hi, down.hi), 0.0)
    S = IntervalArray(s)
    prod = (S + 1.0)[..., 0]
    for i in range(1, s.shape[-1]):
        prod = prod * (S + 1.0)[..., i]
    bracket = prod - S.sum(axis=-1) - 1.0
    return np.maximum((Omega.exp() * bracket).hi, 0.0)


def _generic_remainder(tag, L, U, a, Omega: IntervalArray, lam, mu):
    n = L.shape[-1]
    R = IntervalArray(lam, mu)
    # direct interval evaluation of the defect
    Delta = IntervalArray(L, U) - IntervalArray(a)
    terms = _clamp(Omega[..., None] + Delta, lam[..., None], mu[..., None]).apply(tag, strict=False)
    alpha_omega = _clamp(Omega, lam, mu).apply(tag, strict=False)
    defect = terms.sum(axis=-1) - alpha_omega.scale(float(n - 1)) - R.apply(tag, strict=False)
    r_direct = defect.mag()
    # second-order bound
    m = np.maximum(_up(U - a), _up(a - L))
    pairs = np.zeros_like(m[..., 0])
    prefix = m[..., 0]
    for k in range(1, n):
        pairs = _up(pairs + _up(prefix * m[..., k]))
        prefix = _up(prefix + m[..., k])
    d2 = _second_derivative(tag, R).mag()
    with np.errstate(invalid="ignore", over="ignore"):
        r_second = _up(d2 * pairs)
    r_second = np.where(pairs == 0.0, 0.0, r_second)
    r = np.fmin(r_direct, r_second)
    return np.where(np.isnan(r), np.inf, r)


def _entire_if_nan(C: IntervalArray) -> IntervalArray:
    """Unbounded operands give ``inf - inf``; widen those coefficients to the real line."""
    bad = np.isnan(C.lo) | np.isnan(C.hi)
    if not bad.any():
        return C
    return IntervalArray(np.where(bad, -np.inf, C.lo), np.where(bad, np.inf, C.hi))


def compose_coeffs(tag: str, A: IntervalArray, strict: bool = True) -> IntervalArray:
    """Univariate composition rule; returns the coefficients of ``tag(g)``."""
    n = A.lo.shape[-2]
    with np.errstate(invalid="ignore", over="ignore"):
        L, U = row_bounds(A)
        Rng = IntervalArray(L, U).sum(axis=-1)
        lam, mu = Rng.lo, Rng.hi
        ok = _DOMAIN_OK.get(tag, lambda lam, mu: np.isfinite(lam) & np.isfinite(mu))(lam, mu)
        ok = ok & np.isfinite(lam) & np.isfinite(mu)
        if strict and not np.all(ok):
            bad = np.argwhere(~np.atleast_1d(ok))[0]
            lam_b = float(np.atleast_1d(lam)[tuple(bad)])
            mu_b = float(np.atleast_1d(mu)[tuple(bad)])
            raise DomainViolation(tag, (lam_b, mu_b))

        a = _central_points(tag, L, U)
        Omega = IntervalArray(a).sum(axis=-1)

        if tag == "exp":
            r = _exp_remainder(L, U, a, Omega)
        else:
            r = _generic_remainder(tag, L, U, a, Omega, lam, mu)
        active = (U > L).sum(axis=-1)
        r = np.where(active <= 1, 0.0, r)

        shift = Omega[..., None] - IntervalArray(a)  # omega - a_i
        arg = shift[..., None] + A
        arg = _clamp(arg, lam[..., None, None], mu[..., None, None])
        alpha_omega = _clamp(Omega, lam, mu).apply(tag, strict=False)
        C = arg.apply(tag, strict=False) - (alpha_omega * _fraction(n))[..., None, None]
        C = _add_remainder(C, widest_row(A), r)
        if not np.all(ok):
            bad = ~ok[..., None, None]
            C = IntervalArray(np.where(bad, -np.inf, C.lo), np.where(bad, np.inf, C.hi))
    return _entire_if_nan(C)


def _midpoint_radius(A: IntervalArray):
    L, U = row_bounds(A)
    a = np.clip(0.5 * L + 0.5 * U, L, U)
    rho = np.maximum(_up(U - a), _up(a - L))
    return a, rho


def _cross_remainder(rho_a, rho_b):
    """Upper bound of ``sum_{i != k} rho_a[i] * rho_b[k]``."""
    n = rho_a.shape[-1]
    RA, RB = IntervalArray(rho_a), IntervalArray(rho_b)
    total_b = RB.sum(axis=-1)
    acc = np.zeros_like(rho_a[..., 0])
    for i in range(n):
        others = (total_b - RB[..., i]).hi
        acc = _up(acc + _up(rho_a[..., i] * np.maximum(others, 0.0)))
    return acc


def mul_coeffs(A: IntervalArray, B: IntervalArray) -> IntervalArray:
    """Product rule for two models on the same grid."""
    n = A.lo.shape[-2]
    with np.errstate(invalid="ignore", over="ignore"):
        a_i, rho_a = _midpoint_radius(A)
        b_i, rho_b = _midpoint_radius(B)
        a = IntervalArray(a_i).sum(axis=-1)
        b = IntervalArray(b_i).sum(axis=-1)
        c = (IntervalArray(a_i) * IntervalArray(b_i)).sum(axis=-1)
        omega = (a * b - c) * _inv_count(n)
        R = _cross_remainder(rho_a, rho_b)
        sa = a[..., None] - IntervalArray(a_i)  # a - a_i
        sb = b[..., None] - IntervalArray(b_i)
        C = (A + sa[..., None]) * (B + sb[..., None]) - (sa * sb)[..., None] - omega[..., None, None]
        return _entire_if_nan(_add_remainder(C, widest_row(A), R))


def sqr_coeffs(A: IntervalArray) -> IntervalArray:
    """Product rule specialised to ``g * g``: each row term is a square."""
    n = A.lo.shape[-2]
    with np.errstate(invalid="ignore", over="ignore"):
        a_i, rho = _midpoint_radius(A)
        a = IntervalArray(a_i).sum(axis=-1)
        c = IntervalArray(a_i).pow(2).sum(axis=-1)
        omega = (a.pow(2) - c) * _inv_count(n)
        R = _cross_remainder(rho, rho)
        sa = a[..., None] - IntervalArray(a_i)
        C = (A + sa[..., None]).pow(2) - sa.pow(2)[..., None] - omega[..., None, None]
        return _entire_if_nan(_add_remainder(C, widest_row(A), R))


def pow_coeffs(A: IntervalArray, k: int, strict: bool = True) -> IntervalArray:
    """Integer power by square-and-multiply over the product rules."""
    if k < 0:
        return pow_coeffs(compose_coeffs("recip", A, strict), -k, strict)
    if k == 0:
        return const_coeffs(A.lo.shape, 1.0, 1.0)
    result = None
    base = A
    while True:
        if k & 1:
            result = base if result is None else mul_coeffs(result, base)
        k >>= 1
        if not k:
            return result
        base = sqr_coeffs(base)


def _ism_ops(strict: bool) -> dict:
    return {
        "add": lambda a, b: a + b,
        "sub": lambda a, b: a - b,
        "mul": mul_coeffs,
        "neg": lambda a: -a,
        "smul": lambda a, c: a.scale(c),
        "pow": lambda a, k: pow_coeffs(a, k, strict),
        "un": lambda a, tag: compose_coeffs(tag, a, strict),
    }


def coeffs_of_expr(e: Expr, bounds: np.ndarray, strict: bool = True) -> list:
    """Propagate models through the DAG; ``bounds`` from :func:`grid_boundaries`.

    Returns one coefficient array of shape ``(..., n_x, N)`` per output.
    """
    shape = bounds.shape[:-1] + (bounds.shape[-1] - 1,)
    values = fold(
        e,
        lambda i: var_coeffs(bounds, i),
        lambda value, lo, hi: const_coeffs(shape, lo, hi),
        _ism_ops(strict),
        live_nodes(e),
    )
    return [values[o] for o in e.outputs]


# ---------------------------------------------------------------------------
# Public model types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Ism:
    """Interval superposition model: a grid plus an ``n_x x N`` coefficient matrix."""

    grid: Grid
    A: IntervalArray

    def __post_init__(self):
        if self.A.lo.shape != (self.grid.n_x, self.grid.N):
            raise ValueError(
                f"coefficients have shape {self.A.lo.shape}, expected {(self.grid.n_x, self.grid.N)}"
            )

    @property
    def n_x(self) -> int:
        return self.grid.n_x

    @property
    def N(self) -> int:
        return self.grid.N

    def coeff(self, i: int, j: int) -> Interval:
        return Interval(self.A.lo[i, j], self.A.hi[i, j])

    def row_bounds(self):
        return row_bounds(self.A)

    def range(self) -> Interval:
        return range_of(self.A).to_interval()

    def eval(self, x) -> Interval:
        j = self.grid.locate(x)
        return self.cell(j)

    def cell(self, j: Sequence[int]) -> Interval:
        j = [int(v) for v in j]
        if len(j) != self.n_x or any(not 0 <= v < self.N for v in j):
            raise IndexError(f"cell index {j} out of range")
        rows = np.arange(self.n_x)
        return self.A[rows, j].sum(axis=0).to_interval()

    def cells(self) -> IntervalArray:
        """All ``N**n_x`` cell enclosures as an array with one axis per coordinate."""
        return cell_table(self.A)

    def to_json(self) -> dict:
        return {
            "domain": self.grid.domain.to_json(),
            "N": self.N,
            "A": [[[float(self.A.lo[i, j]), float(self.A.hi[i, j])] for j in range(self.N)]
                  for i in range(self.n_x)],
        }

    @classmethod
    def from_json(cls, data) -> "Ism":
        grid = Grid(IntervalBox.from_json(data["domain"]), int(data["N"]))
        arr = np.asarray(data["A"], dtype=float)
        return cls(grid, IntervalArray(arr[..., 0], arr[..., 1]))

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def cell_table(A: IntervalArray) -> IntervalArray:
    """Minkowski sums for every index vector; output axis ``i`` indexes row ``i``."""
    n = A.lo.shape[-2]
    acc = A[..., 0, :]
    for i in range(1, n):
        row = A[..., i, :]
        acc_shape = acc.lo.shape + (1,)
        row_shape = row.lo.shape[:-1] + (1,) * i + row.lo.shape[-1:]
        acc = IntervalArray(acc.lo.reshape(acc_shape), acc.hi.reshape(acc_shape)) + IntervalArray(
            row.lo.reshape(row_shape), row.hi.reshape(row_shape)
        )
    return acc


class IsmVector(tuple):
    """Stacked models of a vector-valued function, all on one grid."""

    def __new__(cls, components):
        comps = tuple(components)
        if not comps:
            raise ValueError("an IsmVector needs at least one component")
        grid = comps[0].grid
        if any(c.grid != grid for c in comps):
            raise GridMismatch("IsmVector components must share one grid")
        return super().__new__(cls, comps)

    @property
    def grid(self) -> Grid:
        return self[0].grid


def _check_grid(A: Ism, B: Ism):
    if A.grid != B.grid:
        raise GridMismatch("models live on different grids")


def ism_var(grid: Grid, i: int) -> Ism:
    if not 0 <= i < grid.n_x:
        raise IndexError(f"variable index {i} out of range for {grid.n_x} variables")
    return Ism(grid, var_coeffs(grid.boundaries, i))


def ism_const(grid: Grid, c: Interval) -> Ism:
    if not isinstance(c, Interval):
        c = Interval.point(c)
    if c.is_empty:
        raise ValueError("constant model of an empty interval")
    return Ism(grid, const_coeffs((grid.n_x, grid.N), c.lo, c.hi))


def ism_add(A: Ism, B: Ism) -> Ism:
    _check_grid(A, B)
    return Ism(A.grid, A.A + B.A)


def ism_neg(A: Ism) -> Ism:
    return Ism(A.grid, -A.A)


def ism_sub(A: Ism, B: Ism) -> Ism:
    _check_grid(A, B)
    return Ism(A.grid, A.A - B.A)


def ism_scale(c: float, A: Ism) -> Ism:
    return Ism(A.grid, A.A.scale(c))


def ism_compose(tag: str, A: Ism) -> Ism:
    return Ism(A.grid, compose_coeffs(tag, A.A))


def ism_mul(A: Ism, B: Ism) -> Ism:
    _check_grid(A, B)
    if A is B:
        return Ism(A.grid, sqr_coeffs(A.A))
    return Ism(A.grid, mul_coeffs(A.A, B.A))


def ism_pow(A: Ism, k: int) -> Ism:
    return Ism(A.grid, pow_coeffs(A.A, k))


def ism_range(A: Ism) -> Interval:
    return A.range()


def ism_eval(A: Ism, x) -> Interval:
    return A.eval(x)


def ism_cell(A: Ism, j: Sequence[int]) -> Interval:
    return A.cell(j)


def ism_of_expr(e: Expr, grid: Grid) -> IsmVector:
    if e.n_vars != grid.n_x:
        raise ValueError(f"expression has {e.n_vars} variables, grid has {grid.n_x}")
    return IsmVector(Ism(grid, C) for C in coeffs_of_expr(e, grid.boundaries))
