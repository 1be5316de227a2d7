import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adasi import core
from adasi.core import (
    Decision,
    MaxIters,
    OracleContractError,
    OracleResponse,
    PiecewiseOracle,
    Precision,
    RangeCovered,
    SearchExhausted,
    SearchState,
    Strategy,
    TestSide,
    bounds,
    brute_force_bounds,
    exhaustive_p,
    inside_set,
    naive_p,
    oc_p,
    run,
    select_next,
    step,
    step_size,
)
from adasi.distributions import chi, gaussian, mass
from adasi.intervals import IntervalUnion, complement, subtract, union

INF = math.inf
G1 = gaussian(1)
EPS = step_size(G1)


def iu(*parts):
    return IntervalUnion(parts)


def Phi(x):
    return mpmath.ncdf(x)


def state(t, searched, truncated, d=G1, side=TestSide.TWO_SIDED):
    return SearchState(t, TestSide(side), d, searched, truncated)


class TestInsideSet:
    def test_two_sided(self):
        assert list(inside_set(2, "two-sided")) == [(-2, 2)]

    def test_left(self):
        assert list(inside_set(2, TestSide.LEFT)) == [(2, INF)]

    def test_right(self):
        assert list(inside_set(2, TestSide.RIGHT)) == [(-INF, 2)]

    def test_degenerate(self):
        assert list(inside_set(0, "two-sided")) == [(0, 0)]


class TestBounds:
    def test_full_search_is_naive(self):
        b = bounds(state(2.0, IntervalUnion.real_line(), IntervalUnion.real_line()))
        ref = float(2 * Phi(-2))
        assert b.lower == pytest.approx(ref, abs=1e-14)
        assert b.upper == pytest.approx(ref, abs=1e-14)
        assert ref == pytest.approx(0.0455003, abs=1e-7)

    def test_hand_evaluated_example(self):
        b = bounds(state(2.0, iu((1, 3)), iu((1, 3))))
        lower = float((Phi(3) - Phi(2)) / (Phi(3) - Phi(-2)))
        upper = float(2 * Phi(-2) / (Phi(-2) + 1 - Phi(1)))
        assert b.lower == pytest.approx(lower, abs=1e-13)
        assert b.upper == pytest.approx(upper, abs=1e-13)
        assert b.lower == pytest.approx(0.021928, abs=1e-6)
        assert b.upper == pytest.approx(0.250820, abs=1e-6)

    def test_hand_example_matches_brute_force(self):
        s = state(2.0, iu((1, 3)), iu((1, 3)))
        exact = bounds(s)
        bf = brute_force_bounds(s, 2000)
        assert exact.lower - 1e-6 <= bf.lower <= exact.lower + 1e-3
        assert exact.upper - 1e-3 <= bf.upper <= exact.upper + 1e-6

    @pytest.mark.parametrize("delta", [0.1, 0.5, 2.0])
    def test_corollary_single_interval(self, delta):
        t = 1.3
        s_set = iu((-t - delta, t + delta))
        r = iu((-t - delta, -1.0), (0.8, t + 0.2 * delta))
        b = bounds(state(t, s_set, r))
        tails = iu((-INF, -t - delta), (t + delta, INF))
        inside = iu((-t, t))
        expected = mass(G1, union(subtract(r, inside), tails)) / mass(G1, union(r, tails))
        assert b.upper == pytest.approx(expected, abs=1e-12)

    def test_one_sided_bounds_complementary_when_full(self):
        r = iu((-1, 0.5), (2, 4))
        left = bounds(state(1.0, IntervalUnion.real_line(), r, side="left"))
        right = bounds(state(1.0, IntervalUnion.real_line(), r, side="right"))
        assert left.lower + right.lower == pytest.approx(1.0, abs=1e-12)

    def test_far_tail_ratio(self):
        # numerator and denominator both underflow in linear space
        b = bounds(state(45.0, iu((-INF, -44.0), (44.0, INF)), iu((44.0, 46.0))))
        ref = float((Phi(-45) - Phi(-46)) / (Phi(-44) - Phi(-46)))
        assert b.lower == pytest.approx(ref, rel=1e-10)
        assert b.upper == pytest.approx(ref, rel=1e-10)


class TestBruteForce:
    def test_full_search(self):
        s = state(1.5, IntervalUnion.real_line(), IntervalUnion.real_line())
        bf = brute_force_bounds(s, 50)
        p = float(2 * Phi(-1.5))
        assert bf.lower == pytest.approx(p, abs=1e-12)
        assert bf.upper == pytest.approx(p, abs=1e-12)

    def test_prefix_shortcut_matches_enumeration(self):
        # enumerate every subset of a coarse grid directly
        s = state(0.7, iu((-0.2, 1.1)), iu((0.1, 1.1)))
        grid_n, hw = 10, 5.0
        bf = brute_force_bounds(s, grid_n, half_width=hw)
        edges = np.linspace(-hw, hw, grid_n + 1)
        free = complement(s.searched)
        cells = [free & iu((lo, hi)) for lo, hi in zip(edges[:-1], edges[1:])]
        cells = [c for c in cells if len(c) and mass(G1, c) > 0]
        inside = inside_set(0.7, "two-sided")
        vals = []
        for k in range(len(cells) + 1):
            for combo in itertools.combinations(cells, k):
                region = s.truncated
                for c in combo:
                    region = region | c
                vals.append(mass(G1, region - inside) / mass(G1, region))
        assert bf.lower == pytest.approx(min(vals), abs=1e-14)
        assert bf.upper == pytest.approx(max(vals), abs=1e-14)

    def test_r_itself_is_admissible(self):
        s = state(1.0, iu((-0.5, 2.0)), iu((0.5, 2.0)))
        b = bounds(s)
        p_r = mass(G1, s.truncated - inside_set(1.0, "two-sided")) / mass(G1, s.truncated)
        assert b.lower <= p_r <= b.upper


class TestSelectNext:
    def test_pi1(self):
        s = state(1.0, iu((0, 3)), iu((0, 3)))
        assert select_next(s, Strategy.PI1) == pytest.approx(-EPS, abs=1e-15)

    def test_pi2(self):
        s = state(1.0, iu((-1, 2)), iu((-1, 2)))
        assert select_next(s, Strategy.PI2) == pytest.approx(-1 - EPS, abs=1e-15)

    def test_pi2_mode_free(self):
        s = state(3.0, iu((2, 4)), iu((2, 4)))
        assert select_next(s, "pi2") == 0.0

    def test_pi3(self):
        s = state(1.0, iu((-1, 0.5), (0.8, 3)), iu((0.8, 3)))
        assert select_next(s, Strategy.PI3) == pytest.approx(0.8 - EPS, abs=1e-15)

    def test_narrow_gap_uses_midpoint(self):
        s = state(1.0, iu((-1, 0.5), (0.5 + 1e-8, 3)), iu((0.5 + 1e-8, 3)))
        z = select_next(s, Strategy.PI1)
        assert 0.5 < z < 0.5 + 1e-8

    def test_exhausted(self):
        s = state(1.0, IntervalUnion.real_line(), IntervalUnion.real_line())
        with pytest.raises(SearchExhausted):
            select_next(s, Strategy.PI3)

    def test_chi_never_probes_negative(self):
        s = state(1.0, iu((0.5, 2)), iu((0.5, 2)), d=chi(3))
        for strat in Strategy:
            assert select_next(s, strat) > 0

    @pytest.mark.parametrize("strat", list(Strategy))
    def test_point_is_unsearched(self, strat):
        s = state(0.3, iu((-2, -1), (0.1, 0.9), (1.5, 4)), iu((0.1, 0.9)))
        z = select_next(s, strat)
        assert z not in s.searched


class TestStepAndRun:
    def make_oracle(self):
        # R = [1, 3] with t = 2; everything else is a different output
        return PiecewiseOracle([1.0, 3.0], ["x", "obs", "y"], "obs")

    def test_initial_state(self):
        st_ = core.initial_state(2.0, "two-sided", G1, self.make_oracle())
        assert list(st_.searched) == [(1, 3)] and st_.truncated == st_.searched

    def test_step_nonmatching_grows_only_s(self):
        o = self.make_oracle()
        s0 = core.initial_state(2.0, "two-sided", G1, o)
        b0 = bounds(s0)
        s1 = step(s0, o, 0.5)
        assert s1.truncated == s0.truncated
        assert len(s1.searched.parts) == 1 and s1.searched.parts[0][0] == -INF
        b1 = bounds(s1)
        assert b1.upper <= b0.upper + 1e-15 and b1.lower >= b0.lower - 1e-15
        assert s1.oracle_calls == 2 and s1.iteration == 2

    def test_step_matching_grows_both(self):
        o = PiecewiseOracle([1.0, 3.0, 4.0], ["x", "obs", "obs", "y"], "obs")
        s0 = core.initial_state(2.0, "two-sided", G1, o)
        s1 = step(s0, o, 3.5)
        assert list(s1.truncated) == [(1, 4)]

    def test_contract_violation(self):
        class Liar:
            def query(self, z):
                return OracleResponse(0, iu((z + 1, z + 2)), True)

        with pytest.raises(OracleContractError):
            core.initial_state(0.0, "two-sided", G1, Liar())

    def test_run_to_exhaustion_gives_exact(self):
        res = run(2.0, "two-sided", G1, self.make_oracle(), "pi3", rule=None)
        p = float((Phi(3) - Phi(2)) / (Phi(3) - Phi(1)))
        assert res.p_lower == pytest.approx(p, abs=1e-13)
        assert res.p_upper == pytest.approx(p, abs=1e-13)

    def test_decision_rule(self):
        res = run(2.0, "two-sided", G1, self.make_oracle(), "pi3", rule=Decision(0.05))
        assert res.decision is False  # exact p = 0.136

    def test_decision_reject(self):
        o = PiecewiseOracle([-1.0, 0.5], ["a", "b", "obs"], "obs")
        res = run(3.0, "two-sided", G1, o, "pi1", rule=Decision(0.05))
        assert res.decision is True and res.p_upper < 0.05

    def test_precision_rule(self):
        o = PiecewiseOracle(np.linspace(-5, 5, 41), [("k", i % 3) for i in range(42)], ("k", 2))
        t = 0.5 * (np.linspace(-5, 5, 41)[22] + np.linspace(-5, 5, 41)[23])
        res = run(t, "two-sided", G1, o, "pi3", rule=Precision(0.001))
        assert res.p_upper - res.p_lower < 0.001

    def test_max_iters_inconclusive(self):
        o = PiecewiseOracle(np.linspace(-5, 5, 41), [("k", i % 3) for i in range(42)], ("k", 2))
        t = 0.5 * (np.linspace(-5, 5, 41)[22] + np.linspace(-5, 5, 41)[23])
        res = run(t, "two-sided", G1, o, "pi1", rule=Precision(1e-9), max_iters=3)
        assert res.inconclusive and res.state.iteration == 3

    def test_range_covered_matches_exhaustive(self):
        o = self.make_oracle()
        res = run(2.0, "two-sided", G1, o, "pi3", rule=RangeCovered(-20, 20))
        p = exhaustive_p(2.0, "two-sided", G1, self.make_oracle())
        assert res.p_lower == pytest.approx(p, abs=1e-8)
        assert res.p_upper == pytest.approx(p, abs=1e-8)

    def test_max_iters_rule(self):
        o = self.make_oracle()
        res = run(2.0, "two-sided", G1, o, "pi3", rule=MaxIters(2))
        assert res.state.iteration == 2


class TestBaselines:
    def test_exhaustive_example(self):
        o = PiecewiseOracle([1.0, 3.0], ["x", "obs", "y"], "obs")
        ref = float((Phi(3) - Phi(2)) / (Phi(3) - Phi(1)))
        assert exhaustive_p(2.0, "two-sided", G1, o) == pytest.approx(ref, abs=1e-13)
        assert ref == pytest.approx(0.136042, abs=1e-6)

    def test_exhaustive_no_conditioning(self):
        o = PiecewiseOracle([], ["obs"], "obs")
        assert exhaustive_p(1.3, "two-sided", G1, o) == pytest.approx(naive_p(1.3, "two-sided", G1), abs=1e-15)

    def test_exhaustive_chi2(self):
        o = PiecewiseOracle([], ["obs"], "obs")
        assert exhaustive_p(1.0, "two-sided", chi(2), o) == pytest.approx(math.exp(-0.5), abs=1e-12)
        assert math.exp(-0.5) == pytest.approx(0.606531, abs=1e-6)

    def test_exhaustive_sweeps_many_cells(self):
        edges = np.linspace(-25, 25, 201)
        labels = [i % 2 for i in range(202)]
        o = PiecewiseOracle(edges, labels, 1)
        t = 0.5 * (edges[100] + edges[101])
        p = exhaustive_p(t, "two-sided", G1, o)
        region = IntervalUnion([(edges[i - 1], edges[i]) for i in range(1, 201) if labels[i] == 1])
        region = region & iu((-20, 20)) | (iu((edges[-1], INF)) if labels[-1] == 1 else IntervalUnion.empty())
        ref = mass(G1, region - inside_set(t, "two-sided")) / mass(G1, region)
        assert p == pytest.approx(ref, abs=1e-12)

    def test_oc(self):
        o = PiecewiseOracle([1.0, 3.0], ["x", "obs", "y"], "obs")
        assert oc_p(2.0, "two-sided", G1, o) == pytest.approx(0.136042, abs=1e-6)

    def test_oc_no_conditioning(self):
        o = PiecewiseOracle([], ["obs"], "obs")
        assert oc_p(0.7, "two-sided", G1, o) == pytest.approx(naive_p(0.7, "two-sided", G1))

    def test_oc_tiny_region(self):
        o = PiecewiseOracle([2.0, 2.0 + 1e-9], ["x", "obs", "y"], "obs")
        assert 0.0 <= oc_p(2.0 + 5e-10, "two-sided", G1, o) <= 1.0

    def test_naive(self):
        assert naive_p(0.0, "two-sided", G1) == 1.0
        assert naive_p(1.959964, "two-sided", G1) == pytest.approx(0.05, abs=1e-7)

    @pytest.mark.parametrize("t", [-2.0, 0.0, 0.7, 3.3])
    def test_naive_one_sided_complementary(self, t):
        assert naive_p(t, "left", G1) + naive_p(t, "right", G1) == pytest.approx(1.0, abs=1e-12)


# randomized oracles ---------------------------------------------------------------


@st.composite
def piecewise_problems(draw):
    k = draw(st.integers(1, 25))
    edges = sorted(set(round(x, 3) for x in draw(st.lists(st.floats(-6, 6), min_size=k, max_size=k))))
    n_cells = len(edges) + 1
    labels = draw(st.lists(st.integers(0, 2), min_size=n_cells, max_size=n_cells))
    cell = draw(st.integers(0, n_cells - 1))
    labels[cell] = 0
    lo = edges[cell - 1] if cell > 0 else edges[0] - 3.0
    hi = edges[cell] if cell < len(edges) else edges[-1] + 3.0
    frac = draw(st.floats(0.05, 0.95))
    t = lo + frac * (hi - lo)
    side = draw(st.sampled_from(list(TestSide)))
    return edges, labels, t, side


def _true_region(edges, labels):
    bounds_ = [-INF] + list(edges) + [INF]
    return IntervalUnion([(bounds_[i], bounds_[i + 1]) for i, lab in enumerate(labels) if lab == 0])


@settings(max_examples=120, deadline=None)
@given(piecewise_problems(), st.sampled_from(list(Strategy)))
def test_sandwich_and_monotone(problem, strategy):
    edges, labels, t, side = problem
    o = PiecewiseOracle(edges, labels, 0)
    exact = core.selective_p(t, side, G1, _true_region(edges, labels))
    res = run(t, side, G1, o, strategy, rule=None)
    lows = np.array([lo for _, lo, _ in res.state.trace])
    ups = np.array([up for _, _, up in res.state.trace])
    assert np.all(lows <= exact + 1e-9) and np.all(ups >= exact - 1e-9)
    assert np.all(np.diff(lows) >= -1e-12) and np.all(np.diff(ups) <= 1e-12)
    assert res.p_lower == pytest.approx(exact, abs=1e-10)
    assert res.p_upper == pytest.approx(exact, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(piecewise_problems(), st.integers(0, 5))
def test_brute_force_inside_exact_bounds(problem, n_steps):
    edges, labels, t, side = problem
    o = PiecewiseOracle(edges, labels, 0)
    s = core.initial_state(t, side, G1, o)
    for _ in range(n_steps):
        if core.is_exhausted(s):
            break
        s = step(s, o, select_next(s, "pi2"))
    b = bounds(s)
    gaps = []
    for n in (25, 50, 100):
        bf = brute_force_bounds(s, n)
        assert b.lower - 1e-6 <= bf.lower and bf.upper <= b.upper + 1e-6
        gaps.append((bf.lower - b.lower) + (b.upper - bf.upper))
    assert gaps[0] >= gaps[1] - 1e-12 >= gaps[2] - 2e-12


@settings(max_examples=60, deadline=None)
@given(piecewise_problems(), st.floats(0.01, 0.2))
def test_decision_is_sound(problem, alpha):
    edges, labels, t, side = problem
    exact = core.selective_p(t, side, G1, _true_region(edges, labels))
    res = run(t, side, G1, PiecewiseOracle(edges, labels, 0), "pi3", rule=Decision(alpha))
    assert res.decision == (exact < alpha)
