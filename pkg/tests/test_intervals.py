import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from adasi.intervals import (
    MERGE_EPS,
    IntervalUnion,
    InvalidIntervalError,
    canonicalize,
    complement,
    contains,
    covers,
    intersect,
    solve_quadratic_le,
    solve_quadratic_system,
    subtract,
    union,
)

INF = np.inf
R = IntervalUnion.real_line()
EMPTY = IntervalUnion.empty()


def iu(*parts):
    return IntervalUnion(parts)


class TestCanonicalize:
    def test_disjoint_kept(self):
        assert list(canonicalize([(0, 1), (2, 3)])) == [(0, 1), (2, 3)]

    def test_overlap_merged(self):
        assert list(canonicalize([(0, 2), (1, 3)])) == [(0, 3)]

    def test_sub_tolerance_gap_closed(self):
        assert list(canonicalize([(0, 1), (1 + 1e-15, 2)])) == [(0, 2)]

    def test_unsorted_and_nested(self):
        assert list(canonicalize([(5, 6), (-1, 10), (2, 3)])) == [(-1, 10)]

    def test_reversed_raises(self):
        with pytest.raises(InvalidIntervalError):
            canonicalize([(1, 0)])

    def test_idempotent(self):
        a = canonicalize([(0, 1), (0.5, 2), (4, 5)])
        assert IntervalUnion(a.parts) == a

    def test_infinite_parts(self):
        a = canonicalize([(-INF, 0), (3, INF), (-1, 1)])
        assert list(a) == [(-INF, 1), (3, INF)]


class TestSetAlgebra:
    def test_complement_closed(self):
        assert list(complement(iu((0, 1)))) == [(-INF, 0), (1, INF)]

    def test_complement_extremes(self):
        assert complement(EMPTY).is_real_line()
        assert complement(R).is_empty()

    def test_intersect_example(self):
        a = iu((-INF, 1), (3, INF))
        assert list(intersect(a, iu((-2, 2)))) == [(-2, 1)]

    def test_subtract_identity(self):
        assert subtract(R, EMPTY).is_real_line()

    def test_union(self):
        assert list(union(iu((0, 1)), iu((1, 2), (5, 6)))) == [(0, 2), (5, 6)]

    def test_operators(self):
        a, b = iu((0, 2)), iu((1, 3))
        assert a | b == iu((0, 3))
        assert a & b == iu((1, 2))
        assert list(a - b) == [(0, 1)]
        assert ~a == complement(a)

    def test_covers(self):
        a = iu((0, 1), (2, 3))
        assert covers(a, 0.2, 0.9)
        assert not covers(a, 0.5, 2.5)


class TestContains:
    def test_inside(self):
        assert contains(iu((0, 1)), 0.5)

    def test_closed_endpoint(self):
        assert contains(iu((0, 1)), 1.0)

    def test_empty(self):
        assert not contains(EMPTY, 0.0)

    def test_infinite(self):
        assert contains(R, 1e300)
        assert 2.5 in iu((-INF, -1), (2, INF))


class TestQuadratic:
    @pytest.mark.parametrize(
        "coefs, expected",
        [
            ((1, 0, -1), [(-1, 1)]),
            ((-1, 0, -1), [(-INF, INF)]),
            ((0, 2, -4), [(-INF, 2)]),
            ((1, 0, 1), []),
            ((-1, 0, 1), [(-INF, -1), (1, INF)]),
            ((0, -3, 6), [(2, INF)]),
            ((0, 0, -1), [(-INF, INF)]),
            ((0, 0, 1), []),
            ((0, 0, 0), [(-INF, INF)]),
            ((1, -2, 1), [(1, 1)]),
        ],
    )
    def test_cases(self, coefs, expected):
        got = solve_quadratic_le(*coefs)
        assert got.is_close(IntervalUnion(expected), atol=1e-12) or (got.is_empty() and not expected)

    def test_stable_roots_with_cancellation(self):
        # roots 1e-8 and 1e8: naive formula loses the small root
        got = solve_quadratic_le(1.0, -(1e8 + 1e-8), 1.0)
        lo, hi = got.parts[0]
        assert lo == pytest.approx(1e-8, rel=1e-12)
        assert hi == pytest.approx(1e8, rel=1e-12)

    def test_system_intersection(self):
        # r^2 <= 4, r >= -1, not (0 < r < 1)
        got = solve_quadratic_system([1, 0, -1], [0, -1, 1], [-4, -1, 0])
        assert got.is_close(iu((-1, 0), (1, 2)), atol=1e-12)


# property tests -------------------------------------------------------------


@st.composite
def unions(draw):
    k = draw(st.integers(0, 8))
    pts = draw(st.lists(st.floats(-50, 50), min_size=2 * k, max_size=2 * k))
    parts = [(min(pts[2 * i], pts[2 * i + 1]), max(pts[2 * i], pts[2 * i + 1])) for i in range(k)]
    if draw(st.booleans()) and parts:
        parts[0] = (-INF, parts[0][1])
    return IntervalUnion(parts)


def _endpoints(*sets):
    pts = [x for s in sets for x in s.parts.ravel() if np.isfinite(x)]
    return np.array(pts) if pts else np.array([np.nan])


def _member(a: IntervalUnion, z: np.ndarray) -> np.ndarray:
    if not len(a):
        return np.zeros_like(z, dtype=bool)
    return ((z[:, None] >= a.lo[None, :]) & (z[:, None] <= a.hi[None, :])).any(axis=1)


PROBES = np.random.default_rng(0).uniform(-60, 60, 10_000)


def _away_from(z, *sets):
    ends = _endpoints(*sets)
    if np.isnan(ends).all():
        return np.ones_like(z, dtype=bool)
    return np.abs(z[:, None] - ends[None, :]).min(axis=1) > MERGE_EPS * 100


@settings(max_examples=150, deadline=None)
@given(unions(), unions())
def test_set_ops_match_pointwise_logic(a, b):
    z = PROBES
    ma, mb = _member(a, z), _member(b, z)
    ok = _away_from(z, a, b)
    assert np.array_equal(_member(union(a, b), z)[ok], (ma | mb)[ok])
    assert np.array_equal(_member(intersect(a, b), z)[ok], (ma & mb)[ok])
    assert np.array_equal(_member(subtract(a, b), z)[ok], (ma & ~mb)[ok])
    assert np.array_equal(_member(complement(a), z)[ok], (~ma)[ok])


@settings(max_examples=150, deadline=None)
@given(unions())
@example(IntervalUnion([(0.0, 7.344396041845101e-14)]))
def test_complement_laws(a):
    # parts narrower than the merge tolerance vanish under the closed complement
    def wide(p):
        ends = [abs(x) for x in p if np.isfinite(x)]
        return p[1] - p[0] > MERGE_EPS * max([1.0] + ends)

    nondeg = IntervalUnion(p for p in a if wide(p))
    assert complement(complement(a)) == nondeg
    assert union(a, complement(a)).is_real_line()
    inter = intersect(a, complement(a))
    assert inter.measure() <= sum(p[1] - p[0] for p in a if not wide(p))


@settings(max_examples=150, deadline=None)
@given(unions())
def test_canonical_invariants(a):
    p = a.parts
    assert np.all(p[:, 0] <= p[:, 1])
    if len(p) > 1:
        gaps = p[1:, 0] - p[:-1, 1]
        assert np.all(gaps > MERGE_EPS * np.maximum(1, np.abs(p[:-1, 1])))
    assert IntervalUnion(p) == a


coef = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(coef, coef, coef)
def test_solve_quadratic_matches_sign(a2, a1, a0):
    got = solve_quadratic_le(a2, a1, a0)
    r = np.random.default_rng(1).uniform(-100, 100, 10_000)
    val = a2 * r * r + a1 * r + a0
    scale = 1 + abs(a2) + abs(a1) + abs(a0)
    clear = np.abs(val) >= 1e-9 * scale * np.maximum(1, r * r)
    assert np.array_equal(_member(got, r)[clear], (val <= 0)[clear])
