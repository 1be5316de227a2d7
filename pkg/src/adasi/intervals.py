"""Finite unions of closed real intervals.

Every region handled by the library (searched and truncated sets, the
over-conditioning pieces returned by selection oracles, complements) is an
:class:`IntervalUnion`: a sorted array of disjoint ``[lo, hi]`` rows.
Endpoints may be infinite. Open/closed endpoint distinctions are not tracked;
all regions are fed to continuous distributions where boundaries carry no mass.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

#: Gaps narrower than ``MERGE_EPS * max(1, |endpoint|)`` are closed on canonicalization.
MERGE_EPS = 1e-12
#: Relative threshold used to classify vanishing polynomial coefficients.
COEF_EPS = 1e-12


class InvalidIntervalError(ValueError):
    """Raised when an interval has ``lo > hi`` or a NaN endpoint."""


def _merge_tol(x: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return MERGE_EPS * np.maximum(1.0, np.abs(x))


def _canonical(parts: np.ndarray) -> np.ndarray:
    if parts.size == 0:
        return np.empty((0, 2))
    lo, hi = parts[:, 0], parts[:, 1]
    if np.isnan(parts).any():
        raise InvalidIntervalError("interval endpoint is NaN")
    if (lo > hi).any():
        bad = parts[lo > hi][0]
        raise InvalidIntervalError(f"reversed interval [{bad[0]}, {bad[1]}]")
    # [-inf, -inf] and [inf, inf] are not points of the real line
    keep = ~((lo == hi) & np.isinf(lo))
    parts = parts[keep]
    if parts.shape[0] <= 1:
        return parts.copy()
    parts = parts[np.argsort(parts[:, 0], kind="stable")]
    lo, hi = parts[:, 0], parts[:, 1]
    reach = np.maximum.accumulate(hi)
    with np.errstate(invalid="ignore"):
        starts = lo[1:] > reach[:-1] + _merge_tol(reach[:-1])
    starts = np.concatenate(([True], starts))
    idx = np.flatnonzero(starts)
    ends = np.concatenate((idx[1:], [len(lo)])) - 1
    return np.column_stack((lo[idx], reach[ends]))


class IntervalUnion:
    """Canonical union of disjoint closed intervals.

    Instances are immutable. Construct from any iterable of ``(lo, hi)`` pairs;
    overlapping, touching or nearly-touching pieces are merged.

    >>> IntervalUnion([(0, 2), (1, 3)])
    IntervalUnion([(0.0, 3.0)])
    """

    __slots__ = ("_parts",)

    def __init__(self, parts: Iterable[Sequence[float]] | np.ndarray = ()):
        arr = np.asarray(list(parts) if not isinstance(parts, np.ndarray) else parts, dtype=float)
        arr = arr.reshape(-1, 2)
        self._parts = _canonical(arr)
        self._parts.flags.writeable = False

    @classmethod
    def _raw(cls, arr: np.ndarray) -> IntervalUnion:
        # caller guarantees canonical form
        obj = cls.__new__(cls)
        arr = np.ascontiguousarray(arr, dtype=float).reshape(-1, 2)
        arr.flags.writeable = False
        obj._parts = arr
        return obj

    @classmethod
    def empty(cls) -> IntervalUnion:
        return cls._raw(np.empty((0, 2)))

    @classmethod
    def real_line(cls) -> IntervalUnion:
        return cls._raw(np.array([[-np.inf, np.inf]]))

    @classmethod
    def interval(cls, lo: float, hi: float) -> IntervalUnion:
        return cls([(lo, hi)])

    @property
    def parts(self) -> np.ndarray:
        """Read-only ``(k, 2)`` array of parts sorted by lower endpoint."""
        return self._parts

    @property
    def lo(self) -> np.ndarray:
        return self._parts[:, 0]

    @property
    def hi(self) -> np.ndarray:
        return self._parts[:, 1]

    def __len__(self) -> int:
        return self._parts.shape[0]

    def __iter__(self):
        return iter(map(tuple, self._parts.tolist()))

    def __bool__(self) -> bool:
        return len(self) > 0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IntervalUnion):
            return NotImplemented
        return self._parts.shape == other._parts.shape and bool(np.all(self._parts == other._parts))

    def __hash__(self) -> int:
        return hash(self._parts.tobytes())

    def __repr__(self) -> str:
        body = ", ".join(f"({lo!r}, {hi!r})" for lo, hi in self)
        return f"IntervalUnion([{body}])"

    def is_empty(self) -> bool:
        return len(self) == 0

    def is_real_line(self) -> bool:
        return len(self) == 1 and self._parts[0, 0] == -np.inf and self._parts[0, 1] == np.inf

    def is_close(self, other: IntervalUnion, atol: float = 1e-9) -> bool:
        """Endpoint-wise comparison up to ``atol`` (infinite endpoints must match)."""
        if self._parts.shape != other._parts.shape:
            return False
        a, b = self._parts, other._parts
        finite = np.isfinite(a) & np.isfinite(b)
        close = np.abs(np.where(finite, a, 0.0) - np.where(finite, b, 0.0)) <= atol
        return bool(np.all((a == b) | (finite & close)))

    def measure(self) -> float:
        """Total Lebesgue length (``inf`` if unbounded)."""
        return float(np.sum(self.hi - self.lo)) if len(self) else 0.0

    def shift(self, delta: float) -> IntervalUnion:
        return IntervalUnion._raw(self._parts + delta)

    def scale(self, factor: float) -> IntervalUnion:
        """Multiply all endpoints by a positive factor."""
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        with np.errstate(invalid="ignore"):
            return IntervalUnion._raw(self._parts * factor)

    def part_containing(self, z: float) -> tuple[float, float] | None:
        i = np.searchsorted(self.lo, z, side="right") - 1
        if i >= 0 and z <= self._parts[i, 1]:
            return float(self._parts[i, 0]), float(self._parts[i, 1])
        return None

    def distance(self, z: float) -> float:
        """Distance from ``z`` to the closest point of the union (``inf`` if empty)."""
        if not len(self):
            return np.inf
        d = np.maximum(self.lo - z, z - self.hi)
        return float(max(0.0, d.min()))

    # set algebra --------------------------------------------------------------
    def __or__(self, other: IntervalUnion) -> IntervalUnion:
        return union(self, other)

    def __and__(self, other: IntervalUnion) -> IntervalUnion:
        return intersect(self, other)

    def __sub__(self, other: IntervalUnion) -> IntervalUnion:
        return subtract(self, other)

    def __invert__(self) -> IntervalUnion:
        return complement(self)

    def __contains__(self, z: float) -> bool:
        return contains(self, z)


def canonicalize(parts: Iterable[Sequence[float]]) -> IntervalUnion:
    """Build the canonical union of ``parts``.

    Raises:
        InvalidIntervalError: if any part has ``lo > hi``.
    """
    return IntervalUnion(parts)


def union(a: IntervalUnion, b: IntervalUnion) -> IntervalUnion:
    if not len(a):
        return b
    if not len(b):
        return a
    return IntervalUnion._raw(_canonical(np.vstack((a.parts, b.parts))))


def union_all(sets: Iterable[IntervalUnion]) -> IntervalUnion:
    arrays = [s.parts for s in sets if len(s)]
    if not arrays:
        return IntervalUnion.empty()
    return IntervalUnion._raw(_canonical(np.vstack(arrays)))


def intersect(a: IntervalUnion, b: IntervalUnion) -> IntervalUnion:
    if not len(a) or not len(b):
        return IntervalUnion.empty()
    lo = np.maximum(a.lo[:, None], b.lo[None, :])
    hi = np.minimum(a.hi[:, None], b.hi[None, :])
    ok = lo <= hi
    return IntervalUnion._raw(_canonical(np.column_stack((lo[ok], hi[ok]))))


def complement(a: IntervalUnion) -> IntervalUnion:
    if not len(a):
        return IntervalUnion.real_line()
    bounds = np.concatenate(([-np.inf], a.parts.ravel(), [np.inf])).reshape(-1, 2)
    keep = ~((bounds[:, 0] == bounds[:, 1]) & np.isinf(bounds[:, 0]))
    return IntervalUnion._raw(_canonical(bounds[keep]))


def subtract(a: IntervalUnion, b: IntervalUnion) -> IntervalUnion:
    """``a`` minus ``b``, i.e. ``a & ~b`` under the closed-interval convention."""
    if not len(b):
        return a
    return intersect(a, complement(b))


def contains(a: IntervalUnion, z: float) -> bool:
    return a.part_containing(z) is not None


def covers(a: IntervalUnion, lo: float, hi: float) -> bool:
    """Whether ``[lo, hi]`` lies inside a single part of ``a``."""
    part = a.part_containing(lo)
    return part is not None and part[1] >= hi


# polynomial inequalities ------------------------------------------------------


def solve_quadratic_le(a2: float, a1: float, a0: float) -> IntervalUnion:
    """Solution set of ``a2 r^2 + a1 r + a0 <= 0`` over the reals.

    Coefficients smaller than ``COEF_EPS * (1 + |a2| + |a1| + |a0|)`` are treated
    as zero, so nearly-linear quadratics are solved as linear inequalities and a
    vanishing polynomial is read as ``0 <= 0`` (the whole line).
    """
    return solve_quadratic_system(np.array([a2]), np.array([a1]), np.array([a0]))


def _stable_roots(a2: np.ndarray, a1: np.ndarray, disc: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sgn = np.where(a1 >= 0, 1.0, -1.0)
    q = -0.5 * (a1 + sgn * np.sqrt(disc))
    return q, sgn


def solve_quadratic_system(a2: np.ndarray, a1: np.ndarray, a0: np.ndarray) -> IntervalUnion:
    """Intersection of the solution sets of many ``a2 r^2 + a1 r + a0 <= 0``.

    The per-inequality solution is either an interval (possibly a ray, the line
    or empty) or the line minus an open interval. The intersection is therefore
    one interval with a union of open holes removed.
    """
    a2 = np.asarray(a2, dtype=float).ravel()
    a1 = np.asarray(a1, dtype=float).ravel()
    a0 = np.asarray(a0, dtype=float).ravel()
    if not (np.isfinite(a2).all() and np.isfinite(a1).all() and np.isfinite(a0).all()):
        raise ValueError("quadratic coefficients must be finite")
    tol = COEF_EPS * (1.0 + np.abs(a2) + np.abs(a1) + np.abs(a0))
    quad = np.abs(a2) >= tol
    lin = ~quad & (np.abs(a1) >= tol)
    const = ~quad & ~lin

    lo, hi = -np.inf, np.inf
    holes = []

    if np.any(const & (a0 > tol)):
        return IntervalUnion.empty()

    if lin.any():
        b1, b0 = a1[lin], a0[lin]
        root = -b0 / b1
        pos = b1 > 0
        if pos.any():
            hi = min(hi, root[pos].min())
        if (~pos).any():
            lo = max(lo, root[~pos].max())

    if quad.any():
        c2, c1, c0 = a2[quad], a1[quad], a0[quad]
        disc = c1 * c1 - 4.0 * c2 * c0
        neg_disc = disc < 0
        if np.any(neg_disc & (c2 > 0)):
            return IntervalUnion.empty()
        real = ~neg_disc
        c2, c1, c0, disc = c2[real], c1[real], c0[real], disc[real]
        q, _ = _stable_roots(c2, c1, disc)
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = q / c2
            r2 = np.where(q != 0, c0 / q, 0.0)
        r_lo, r_hi = np.minimum(r1, r2), np.maximum(r1, r2)
        up = c2 > 0
        if up.any():
            lo = max(lo, r_lo[up].max())
            hi = min(hi, r_hi[up].min())
        down = ~up
        if down.any():
            holes.append(np.column_stack((r_lo[down], r_hi[down])))

    if lo > hi:
        return IntervalUnion.empty()
    base = IntervalUnion._raw(np.array([[lo, hi]]))
    if not holes:
        return base
    hole_arr = np.vstack(holes)
    hole_arr = hole_arr[hole_arr[:, 0] < hole_arr[:, 1]]
    if not len(hole_arr):
        return base
    return subtract(base, IntervalUnion._raw(_canonical(hole_arr)))


def solve_linear_system(slope: np.ndarray, intercept: np.ndarray) -> IntervalUnion:
    """Solution set of all ``slope * r + intercept <= 0`` (a single interval or empty)."""
    slope = np.asarray(slope, dtype=float).ravel()
    return solve_quadratic_system(np.zeros_like(slope), slope, intercept)
