"""Closed-interval arithmetic with outward rounding.

Two layers live here:

* :class:`IntervalArray` -- the vectorised kernel.  Endpoints are numpy arrays
  of any (broadcast-compatible) shape and every operation returns an enclosure
  of the elementwise image, inflated outward with ``nextafter``.  All of the
  heavier machinery (expression evaluation over many boxes, interval
  superposition models) runs on this layer.
* :class:`Interval` / :class:`IntervalBox` -- immutable scalar values with an
  explicit empty sentinel, used at API boundaries and in tests.

Rounding model: IEEE round-to-nearest is assumed.  Results of ``+ - * /`` and
``sqrt`` are within half an ulp of the exact value, so one ``nextafter`` step
per endpoint is enough.  Sums use the TwoSum error term and products check
for zero factors, so exact results stay exact.  Library transcendentals (exp,
log, sin, cos, integer powers) carry no correct-rounding guarantee and are
widened by ``TRANSCENDENTAL_ULPS`` steps instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainViolation, NotNested

ATOMS = ("exp", "log", "sin", "cos", "sqrt", "recip")

TRANSCENDENTAL_ULPS = 4

# math.pi < pi < nextafter(math.pi, inf)
PI_LO = math.pi
PI_HI = math.nextafter(math.pi, math.inf)
E_LO = math.e
E_HI = math.nextafter(math.e, math.inf)

_NEG_INF = -np.inf
_POS_INF = np.inf


def _down(x, steps=1):
    for _ in range(steps):
        x = np.nextafter(x, _NEG_INF)
    return x


def _up(x, steps=1):
    for _ in range(steps):
        x = np.nextafter(x, _POS_INF)
    return x


def _sum_down(a, b):
    """Lower bound of ``a + b``; exact sums are not inflated (TwoSum error term)."""
    with np.errstate(invalid="ignore", over="ignore"):
        s = a + b
        bp = s - a
        err = (a - (s - bp)) + (b - bp)
        return np.where((err < 0.0) | ~np.isfinite(err), np.nextafter(s, _NEG_INF), s)


def _sum_up(a, b):
    with np.errstate(invalid="ignore", over="ignore"):
        s = a + b
        bp = s - a
        err = (a - (s - bp)) + (b - bp)
        return np.where((err > 0.0) | ~np.isfinite(err), np.nextafter(s, _POS_INF), s)


def _underflow(p, x, y):
    return (p == 0.0) & (x != 0.0) & (y != 0.0)


def _round_products(lo, hi, underflow_of):
    """Outward rounding of product bounds that keeps exact zeros exact.

    A zero bound is exact unless some product of two non-zero factors
    underflowed; ``underflow_of`` computes that mask lazily.
    """
    r_lo, r_hi = _down(lo), _up(hi)
    z_lo, z_hi = lo == 0.0, hi == 0.0
    if np.any(z_lo) or np.any(z_hi):
        uf = underflow_of()
        r_lo = np.where(z_lo & ~uf, 0.0, r_lo)
        r_hi = np.where(z_hi & ~uf, 0.0, r_hi)
    return r_lo, r_hi


class IntervalArray:
    """Array of closed intervals ``[lo[k], hi[k]]`` with outward-rounded arithmetic.

    A non-finite or NaN endpoint means "unbounded / unknown".  Such entries
    only appear when an atom is evaluated with ``strict=False`` outside its
    domain, and callers detect them with :meth:`finite`.
    """

    __slots__ = ("lo", "hi")
    __array_priority__ = 1000  # keep numpy scalars from hijacking reflected ops

    def __init__(self, lo, hi=None):
        lo = np.asarray(lo, dtype=float)
        self.lo = lo
        self.hi = lo if hi is None else np.asarray(hi, dtype=float)

    # ------------------------------------------------------------------ basics
    @classmethod
    def from_intervals(cls, items: Iterable["Interval"]) -> "IntervalArray":
        items = list(items)
        return cls([a.lo for a in items], [a.hi for a in items])

    @property
    def shape(self):
        return np.broadcast_shapes(self.lo.shape, self.hi.shape)

    def __getitem__(self, key) -> "IntervalArray":
        return IntervalArray(self.lo[key], self.hi[key])

    def __repr__(self):
        return f"IntervalArray(lo={self.lo!r}, hi={self.hi!r})"

    def to_interval(self) -> "Interval":
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            return ENTIRE
        return Interval(lo, hi)

    def width(self):
        return self.hi - self.lo

    def mid(self):
        return 0.5 * self.lo + 0.5 * self.hi

    def mag(self):
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def finite(self):
        return np.isfinite(self.lo) & np.isfinite(self.hi)

    def subset_of(self, other: "IntervalArray"):
        return (self.lo >= other.lo) & (self.hi <= other.hi)

    def disjoint_from(self, other: "IntervalArray"):
        return (self.hi < other.lo) | (self.lo > other.hi)

    # -------------------------------------------------------------- arithmetic
    @staticmethod
    def _coerce(other) -> "IntervalArray":
        if isinstance(other, IntervalArray):
            return other
        if isinstance(other, Interval):
            return IntervalArray(other.lo, other.hi)
        return IntervalArray(other)

    def __add__(self, other) -> "IntervalArray":
        o = self._coerce(other)
        return IntervalArray(_sum_down(self.lo, o.lo), _sum_up(self.hi, o.hi))

    __radd__ = __add__

    def __neg__(self) -> "IntervalArray":
        return IntervalArray(-self.hi, -self.lo)

    def __sub__(self, other) -> "IntervalArray":
        o = self._coerce(other)
        return IntervalArray(_sum_down(self.lo, -o.hi), _sum_up(self.hi, -o.lo))

    def __rsub__(self, other) -> "IntervalArray":
        return self._coerce(other) - self

    def __mul__(self, other) -> "IntervalArray":
        o = self._coerce(other)
        p1 = self.lo * o.lo
        p2 = self.lo * o.hi
        p3 = self.hi * o.lo
        p4 = self.hi * o.hi
        lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
        hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))

        def underflow():
            return (
                _underflow(p1, self.lo, o.lo)
                | _underflow(p2, self.lo, o.hi)
                | _underflow(p3, self.hi, o.lo)
                | _underflow(p4, self.hi, o.hi)
            )

        return IntervalArray(*_round_products(lo, hi, underflow))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "IntervalArray":
        return self * self._coerce(other).recip()

    def scale(self, c) -> "IntervalArray":
        """Multiply by real scalar(s) ``c``; sign-aware endpoint swap."""
        c = np.asarray(c, dtype=float)
        a, b = c * self.lo, c * self.hi

        def underflow():
            return _underflow(a, c, self.lo) | _underflow(b, c, self.hi)

        return IntervalArray(*_round_products(np.minimum(a, b), np.maximum(a, b), underflow))

    def sum(self, axis: int = 0) -> "IntervalArray":
        """Outward-rounded sum along ``axis``."""
        lo = np.moveaxis(self.lo, axis, 0)
        hi = np.moveaxis(self.hi, axis, 0)
        acc_lo, acc_hi = lo[0], hi[0]
        for k in range(1, lo.shape[0]):
            acc_lo = _sum_down(acc_lo, lo[k])
            acc_hi = _sum_up(acc_hi, hi[k])
        return IntervalArray(acc_lo, acc_hi)

    # ------------------------------------------------------------------ atoms
    def _violation(self, op, bad, strict):
        if not np.any(bad):
            return None
        if strict:
            idx = np.argwhere(np.broadcast_to(bad, self.shape))
            k = tuple(idx[0]) if idx.size else ()
            lo = np.broadcast_to(self.lo, self.shape)[k]
            hi = np.broadcast_to(self.hi, self.shape)[k]
            raise DomainViolation(op, (float(lo), float(hi)))
        return bad

    @staticmethod
    def _unbounded(bad, lo, hi):
        if bad is None:
            return lo, hi
        return np.where(bad, -np.inf, lo), np.where(bad, np.inf, hi)

    def exp(self, strict: bool = True) -> "IntervalArray":
        with np.errstate(over="ignore"):
            lo = _down(np.exp(self.lo), TRANSCENDENTAL_ULPS)
            hi = _up(np.exp(self.hi), TRANSCENDENTAL_ULPS)
        return IntervalArray(np.maximum(lo, 0.0), hi)

    def log(self, strict: bool = True) -> "IntervalArray":
        bad = self._violation("log", ~(self.lo > 0.0), strict)
        with np.errstate(divide="ignore", invalid="ignore"):
            lo = _down(np.log(self.lo), TRANSCENDENTAL_ULPS)
            hi = _up(np.log(self.hi), TRANSCENDENTAL_ULPS)
        return IntervalArray(*self._unbounded(bad, lo, hi))

    def sqrt(self, strict: bool = True) -> "IntervalArray":
        bad = self._violation("sqrt", ~(self.lo >= 0.0), strict)
        with np.errstate(invalid="ignore"):
            lo = np.maximum(_down(np.sqrt(self.lo)), 0.0)
            hi = _up(np.sqrt(self.hi))
        return IntervalArray(*self._unbounded(bad, lo, hi))

    def recip(self, strict: bool = True) -> "IntervalArray":
        bad = self._violation("recip", ~((self.lo > 0.0) | (self.hi < 0.0)), strict)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            lo = _down(1.0 / self.hi)
            hi = _up(1.0 / self.lo)
        return IntervalArray(*self._unbounded(bad, lo, hi))

    def sin(self, strict: bool = True) -> "IntervalArray":
        return self._trig(np.sin, 0.5 * math.pi, -0.5 * math.pi)

    def cos(self, strict: bool = True) -> "IntervalArray":
        return self._trig(np.cos, 0.0, math.pi)

    def _trig(self, fn, max_phase: float, min_phase: float) -> "IntervalArray":
        lo, hi = self.lo, self.hi
        two_pi = 2.0 * math.pi
        with np.errstate(invalid="ignore"):
            v_lo, v_hi = fn(lo), fn(hi)
            r_lo = _down(np.minimum(v_lo, v_hi), TRANSCENDENTAL_ULPS)
            r_hi = _up(np.maximum(v_lo, v_hi), TRANSCENDENTAL_ULPS)
            full = (hi - lo) >= 2.0 * PI_LO
            for phase, is_max in ((max_phase, True), (min_phase, False)):
                base = np.floor((lo - phase) / two_pi) - 1.0
                hit = np.zeros(np.broadcast_shapes(lo.shape, hi.shape), dtype=bool)
                for off in range(4):
                    c = phase + (base + off) * two_pi
                    # slack absorbs the rounding error of c relative to the true extremum
                    tol = 8.0 * np.finfo(float).eps * (np.abs(c) + 4.0)
                    hit |= (c >= lo - tol) & (c <= hi + tol)
                if is_max:
                    r_hi = np.where(hit | full, 1.0, r_hi)
                else:
                    r_lo = np.where(hit | full, -1.0, r_lo)
        return IntervalArray(np.clip(r_lo, -1.0, 1.0), np.clip(r_hi, -1.0, 1.0))

    def pow(self, k: int, strict: bool = True) -> "IntervalArray":
        """Integer power with the parity-aware rule; negative ``k`` goes through recip."""
        k = int(k)
        if k == 0:
            shape = self.shape
            return IntervalArray(np.ones(shape), np.ones(shape))
        if k == 1:
            return self
        if k < 0:
            return self.recip(strict).pow(-k, strict)
        lo, hi = self.lo, self.hi
        with np.errstate(over="ignore"):
            p_lo, p_hi = lo**k, hi**k
        if k % 2:
            r_lo = np.where(lo == 0.0, 0.0, _down(p_lo, TRANSCENDENTAL_ULPS))
            r_hi = np.where(hi == 0.0, 0.0, _up(p_hi, TRANSCENDENTAL_ULPS))
            return IntervalArray(r_lo, r_hi)
        small = np.minimum(p_lo, p_hi)
        big = np.maximum(p_lo, p_hi)
        straddle = (lo < 0.0) & (hi > 0.0)
        r_lo = np.where(straddle, 0.0, np.maximum(_down(small, TRANSCENDENTAL_ULPS), 0.0))
        r_hi = np.where(big == 0.0, 0.0, _up(big, TRANSCENDENTAL_ULPS))
        return IntervalArray(r_lo, r_hi)

    def apply(self, tag: str, strict: bool = True) -> "IntervalArray":
        try:
            fn = getattr(self, _ATOM_METHODS[tag])
        except KeyError:
            raise ValueError(f"unknown atom {tag!r}") from None
        return fn(strict)


_ATOM_METHODS = {t: t for t in ATOMS}


# ---------------------------------------------------------------------------
# Scalar values
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Interval:
    """Closed interval ``[lo, hi]``.

    The empty set is the distinguished value :data:`EMPTY`; the whole real
    line is :data:`ENTIRE`.  Any other interval has finite endpoints.
    """

    lo: float
    hi: float
    _empty: bool = field(default=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        if self._empty:
            return
        if not self.lo <= self.hi:
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            if not (self.lo == -math.inf and self.hi == math.inf):
                raise ValueError(f"half-unbounded interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(x, x)

    @property
    def is_empty(self) -> bool:
        return self._empty

    def __repr__(self):
        if self._empty:
            return "Interval.EMPTY"
        return f"Interval({self.lo!r}, {self.hi!r})"

    def __str__(self):
        return "[]" if self._empty else f"[{self.lo:.17g}, {self.hi:.17g}]"

    # -- measures
    def diam(self) -> float:
        if self._empty:
            raise ValueError("diam of empty interval")
        return self.hi - self.lo

    def mid(self) -> float:
        if self._empty:
            raise ValueError("mid of empty interval")
        return 0.5 * self.lo + 0.5 * self.hi

    def mag(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    # -- set relations
    def contains(self, x) -> bool:
        if self._empty:
            return False
        if isinstance(x, Interval):
            return x.is_subset(self)
        return self.lo <= x <= self.hi

    __contains__ = contains

    def is_subset(self, other: "Interval") -> bool:
        if self._empty:
            return True
        if other._empty:
            return False
        return other.lo <= self.lo and self.hi <= other.hi

    def intersect(self, other: "Interval") -> "Interval":
        if self._empty or other._empty:
            return EMPTY
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        return Interval(lo, hi) if lo <= hi else EMPTY

    def hull(self, other: "Interval") -> "Interval":
        if self._empty:
            return other
        if other._empty:
            return self
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    # -- arithmetic, all delegated to the kernel
    def _arr(self) -> IntervalArray:
        return IntervalArray(self.lo, self.hi)

    def _binary(self, other, op):
        if not isinstance(other, Interval):
            other = Interval.point(other)
        if self._empty or other._empty:
            return EMPTY
        return op(self._arr(), other._arr()).to_interval()

    def __add__(self, other):
        return self._binary(other, IntervalArray.__add__)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, IntervalArray.__sub__)

    def __rsub__(self, other):
        return Interval.point(other) - self

    def __mul__(self, other):
        return self._binary(other, IntervalArray.__mul__)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, IntervalArray.__truediv__)

    def __neg__(self):
        return self if self._empty else Interval(-self.hi, -self.lo)

    def __pow__(self, k: int):
        return ipow(self, k)

    def apply(self, tag: str) -> "Interval":
        return univariate(tag, self)

    def to_json(self):
        return None if self._empty else [self.lo, self.hi]

    @classmethod
    def from_json(cls, data) -> "Interval":
        if data is None:
            return EMPTY
        lo, hi = data
        return cls(lo, hi)


EMPTY = Interval(math.inf, -math.inf, True)
ENTIRE = Interval(-math.inf, math.inf)
PI = Interval(PI_LO, PI_HI)
E = Interval(E_LO, E_HI)


def add(a: Interval, b: Interval) -> Interval:
    return a + b


def sub(a: Interval, b: Interval) -> Interval:
    return a + (-b)


def neg(a: Interval) -> Interval:
    return -a


def mul(a: Interval, b: Interval) -> Interval:
    return a * b


def scalar_mul(c: float, a: Interval) -> Interval:
    if a.is_empty:
        return EMPTY
    return a._arr().scale(c).to_interval()


def univariate(tag: str, a: Interval) -> Interval:
    """Image enclosure of ``a`` under atom ``tag``; raises DomainViolation off-domain."""
    if a.is_empty:
        return EMPTY
    try:
        return a._arr().apply(tag).to_interval()
    except DomainViolation as err:
        raise DomainViolation(tag, a) from err


def ipow(a: Interval, k: int) -> Interval:
    if a.is_empty:
        return EMPTY
    try:
        return a._arr().pow(k).to_interval()
    except DomainViolation as err:
        raise DomainViolation("pow", a) from err


def diam(a: Interval) -> float:
    return a.diam()


def mid(a: Interval) -> float:
    return a.mid()


def intersect(a: Interval, b: Interval) -> Interval:
    return a.intersect(b)


def is_subset(a: Interval, b: Interval) -> bool:
    return a.is_subset(b)


def contains(a: Interval, x) -> bool:
    return a.contains(x)


def hausdorff_1d(range_: Interval, enclosure: Interval) -> float:
    """Overestimation of ``enclosure`` relative to a nested ``range_``.

    For nested intervals the sup-inf distance reduces to the larger of the two
    endpoint gaps.
    """
    if not range_.is_subset(enclosure):
        raise NotNested(f"{range_} is not contained in {enclosure}")
    return max(range_.lo - enclosure.lo, enclosure.hi - range_.hi)


# ---------------------------------------------------------------------------
# Boxes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class IntervalBox:
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("an interval box needs at least one component")
        for c in comps:
            if not isinstance(c, Interval):
                raise TypeError(f"box component {c!r} is not an Interval")
            if c.is_empty:
                raise ValueError("box components must be non-empty")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_bounds(cls, lo: Sequence[float], hi: Sequence[float]) -> "IntervalBox":
        return cls(tuple(Interval(a, b) for a, b in zip(lo, hi)))

    @classmethod
    def from_json(cls, data) -> "IntervalBox":
        return cls(tuple(Interval.from_json(pair) for pair in data))

    def to_json(self):
        return [c.to_json() for c in self.components]

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i) -> Interval:
        return self.components[i]

    @property
    def lo(self) -> np.ndarray:
        return np.array([c.lo for c in self.components])

    @property
    def hi(self) -> np.ndarray:
        return np.array([c.hi for c in self.components])

    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    def diam(self) -> float:
        """Max-norm diameter: the widest component."""
        return max(c.diam() for c in self.components)

    def mid(self) -> np.ndarray:
        return np.array([c.mid() for c in self.components])

    def contains(self, x) -> bool:
        return all(c.lo <= v <= c.hi for c, v in zip(self.components, x))

    def is_subset(self, other: "IntervalBox") -> bool:
        return all(a.is_subset(b) for a, b in zip(self.components, other.components))

    def intersect(self, other: "IntervalBox"):
        parts = [a.intersect(b) for a, b in zip(self.components, other.components)]
        if any(p.is_empty for p in parts):
            return None
        return IntervalBox(tuple(parts))

    def __str__(self):
        return " x ".join(str(c) for c in self.components)
