"""Bounded selective p-values from a partial line search.

A selective test reduces to a one-dimensional problem: the data are moved along
``a + b z`` and a selection oracle reports, for each queried ``z``, the interval
union on which the algorithm (plus its over-conditioning sub-events) returns
the same output. The exact selective p-value needs the union of all regions
whose output matches the observed one. This module keeps track of what has
been searched (``S``) and what has been found to match (``R``), bounds the
selective p-value from those two sets at every iteration, and chooses where to
query next.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Hashable, Protocol

import numpy as np

from . import distributions as dist_mod
from .distributions import NullDistribution, log_mass, log_ratio
from .intervals import IntervalUnion, complement, covers, intersect, subtract, union

INF = math.inf
#: Relative offset used to step strictly inside the unsearched set.
STEP_EPS = 1e-6
#: Relative distance below which a returned region is snapped to the queried point.
SNAP_EPS = 1e-9
DEFAULT_MAX_ITERS = 100_000


class SearchError(RuntimeError):
    """Base class for errors raised while searching the line."""


class OracleContractError(SearchError):
    """The oracle returned a region that does not contain the queried point."""


class DegenerateStateError(SearchError):
    """A bound denominator has zero mass."""


class SearchExhausted(SearchError):
    """The searched set already covers the support; there is nothing left to query."""


class DegenerateStatisticError(ValueError):
    """The requested test statistic is undefined for the observed data."""


class TestSide(str, Enum):
    TWO_SIDED = "two-sided"
    LEFT = "left"
    RIGHT = "right"

    __test__ = False


@dataclass(frozen=True)
class LineParam:
    """The line ``a + b z`` through the observed data, with ``a + b * z_obs = D_obs``."""

    a: np.ndarray
    b: np.ndarray
    z_obs: float

    def point(self, z: float) -> np.ndarray:
        return self.a + self.b * z


def line_from_eta(eta: np.ndarray, data: np.ndarray, sigma: float) -> tuple[LineParam, NullDistribution]:
    """Parametrize the data along the direction of a linear contrast ``eta``.

    Returns the line with ``b = eta / ||eta||^2`` and ``a`` the component of the
    data orthogonal to ``eta``, together with the null law ``N(0, (sigma ||eta||)^2)``
    of ``eta^T D``.
    """
    eta = np.asarray(eta, dtype=float)
    data = np.asarray(data, dtype=float)
    nrm2 = float(eta @ eta)
    if nrm2 <= 0:
        raise ValueError("contrast vector is zero")
    b = eta / nrm2
    z_obs = float(eta @ data)
    a = data - b * z_obs
    return LineParam(a, b, z_obs), dist_mod.gaussian(sigma * math.sqrt(nrm2))


@dataclass(frozen=True)
class OracleResponse:
    """What the selection oracle reports at one point of the line.

    Attributes:
        output_id: Hashable identifier of the algorithm output at the point.
        oc_region: Region on which output and over-conditioning events are unchanged.
        matches_observed: Whether the algorithm output equals the observed one.
    """

    output_id: Hashable
    oc_region: IntervalUnion
    matches_observed: bool


class SelectionOracle(Protocol):
    def query(self, z: float) -> OracleResponse: ...


class PiecewiseOracle:
    """Oracle defined by an explicit partition of the line.

    Useful for tests and demonstrations. ``breakpoints`` splits the line into
    ``len(breakpoints) + 1`` cells with labels ``labels``; a point matches when its
    label equals ``observed``. Adjacent cells with the same label are still
    reported separately, as an over-conditioned oracle would.
    """

    def __init__(self, breakpoints, labels, observed):
        self.breakpoints = np.asarray(breakpoints, dtype=float)
        if len(labels) != len(self.breakpoints) + 1:
            raise ValueError("need one label per cell")
        if np.any(np.diff(self.breakpoints) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        self.labels = list(labels)
        self.observed = observed
        self.calls = 0

    def query(self, z: float) -> OracleResponse:
        self.calls += 1
        i = int(np.searchsorted(self.breakpoints, z, side="right"))
        lo = self.breakpoints[i - 1] if i > 0 else -INF
        hi = self.breakpoints[i] if i < len(self.breakpoints) else INF
        label = self.labels[i]
        return OracleResponse(label, IntervalUnion([(lo, hi)]), label == self.observed)


@dataclass(frozen=True)
class BoundsPair:
    lower: float
    upper: float
    iteration: int = 0

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class SearchState:
    """Snapshot of a line search.

    Attributes:
        t: Observed statistic.
        side: Alternative of the test.
        dist: Unconditional null law of the statistic.
        searched: Union of all regions returned by the oracle so far.
        truncated: The part of ``searched`` whose output matched the observed one.
        iteration: Number of updates since initialization (starts at 1).
        oracle_calls: Number of oracle queries, including the one at ``t``.
        trace: ``(iteration, lower, upper)`` after every recorded update.
    """

    t: float
    side: TestSide
    dist: NullDistribution
    searched: IntervalUnion
    truncated: IntervalUnion
    iteration: int = 1
    oracle_calls: int = 1
    trace: tuple[tuple[int, float, float], ...] = ()

    @property
    def unsearched(self) -> IntervalUnion:
        return complement(self.searched)


class Strategy(str, Enum):
    PI1 = "pi1"
    PI2 = "pi2"
    PI3 = "pi3"


# termination rules -------------------------------------------------------------


@dataclass(frozen=True)
class Precision:
    """Stop once ``upper - lower < eps``."""

    eps: float

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError("precision must lie in (0, 1)")

    def done(self, state: SearchState, b: BoundsPair) -> bool:
        return b.upper - b.lower < self.eps


@dataclass(frozen=True)
class Decision:
    """Stop once the test decision at level ``alpha`` is determined."""

    alpha: float

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("significance level must lie in (0, 1)")

    def done(self, state: SearchState, b: BoundsPair) -> bool:
        return b.upper < self.alpha or b.lower >= self.alpha


@dataclass(frozen=True)
class RangeCovered:
    """Stop once ``[lo, hi]`` is inside the searched set."""

    lo: float
    hi: float

    def done(self, state: SearchState, b: BoundsPair) -> bool:
        return covers(state.searched, self.lo, self.hi)


@dataclass(frozen=True)
class MaxIters:
    n: int

    def done(self, state: SearchState, b: BoundsPair) -> bool:
        return state.iteration >= self.n


TerminationRule = Precision | Decision | RangeCovered | MaxIters


# bounds -------------------------------------------------------------------------


def inside_set(t: float, side: TestSide | str) -> IntervalUnion:
    """Values of the statistic that are *less* extreme than ``t``."""
    side = TestSide(side)
    if side is TestSide.TWO_SIDED:
        return IntervalUnion([(-abs(t), abs(t))])
    if side is TestSide.LEFT:
        return IntervalUnion([(t, INF)])
    return IntervalUnion([(-INF, t)])


def _bound_regions(state: SearchState):
    inside = inside_set(state.t, state.side)
    free = complement(state.searched)
    r = state.truncated
    lower_num = subtract(r, inside)
    lower_den = union(r, intersect(free, inside))
    upper_num = subtract(union(r, free), inside)
    upper_den = union(r, subtract(free, inside))
    return lower_num, lower_den, upper_num, upper_den


def bounds(state: SearchState) -> BoundsPair:
    """Lower and upper bounds of the selective p-value given ``S`` and ``R``.

    The selective p-value is a ratio of masses over the unknown truncation
    region, which lies between ``R`` and ``R`` plus the unsearched set. The
    bounds take the extreme admissible choices: unsearched mass inside the
    "less extreme" set is added only to the denominator for the lower bound,
    and unsearched mass outside it is added to both for the upper bound.
    """
    d = state.dist
    ln, ld, un, ud = _bound_regions(state)
    log_ld, log_ud = log_mass(d, ld), log_mass(d, ud)
    if log_ld == -INF or log_ud == -INF:
        raise DegenerateStateError(f"zero-mass denominator at t={state.t}")
    lower = log_ratio(log_mass(d, ln), log_ld)
    upper = log_ratio(log_mass(d, un), log_ud)
    return BoundsPair(lower, max(lower, upper), state.iteration)


def selective_p(t: float, side: TestSide | str, d: NullDistribution, region: IntervalUnion) -> float:
    """Exact selective p-value for a fully known truncation region."""
    inside = inside_set(t, side)
    den = log_mass(d, region)
    if den == -INF:
        raise DegenerateStateError("truncation region has zero mass")
    return log_ratio(log_mass(d, subtract(region, inside)), den)


def brute_force_bounds(state: SearchState, grid_n: int, half_width: float | None = None) -> BoundsPair:
    """Grid-search estimate of the extreme selective p-values (test oracle).

    The unsearched set within ``[-half_width, half_width]`` (default ``50`` null
    standard deviations) is cut into ``grid_n`` uniform cells. Every union of
    cells added to ``R`` is an admissible truncation region. For a ratio
    ``(A + sum a_i) / (B + sum b_i)`` the optimal subsets are prefixes of the
    cells ordered by ``a_i / b_i``, so all ``grid_n + 1`` prefixes in both orders
    are evaluated. Coarser grids admit fewer regions and therefore give a bracket
    inside the exact bounds.
    """
    d = state.dist
    if half_width is None:
        half_width = 50.0 * d.unit if d.is_gaussian else 50.0 + abs(state.t)
    left = -half_width if d.is_gaussian else 0.0
    edges = np.linspace(left, half_width, grid_n + 1)
    inside = inside_set(state.t, state.side)
    free = complement(state.searched)
    r = state.truncated

    base_out = dist_mod.mass(d, subtract(r, inside))
    base_all = dist_mod.mass(d, r)
    a_cells, b_cells = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        cell = intersect(free, IntervalUnion([(lo, hi)]))
        if not len(cell):
            continue
        b = dist_mod.mass(d, cell)
        if b <= 0:
            continue
        a_cells.append(dist_mod.mass(d, subtract(cell, inside)))
        b_cells.append(b)
    a_cells, b_cells = np.array(a_cells), np.array(b_cells)

    def prefix_values(order):
        num = base_out + np.concatenate(([0.0], np.cumsum(a_cells[order])))
        den = base_all + np.concatenate(([0.0], np.cumsum(b_cells[order])))
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(den > 0, num / den, np.nan)

    if len(a_cells):
        ratio = a_cells / b_cells
        vals = np.concatenate((prefix_values(np.argsort(ratio)), prefix_values(np.argsort(-ratio))))
    else:
        vals = prefix_values(np.array([], dtype=int))
    return BoundsPair(float(np.nanmin(vals)), float(np.nanmax(vals)), state.iteration)


# strategies ---------------------------------------------------------------------


def _effective_searched(state: SearchState) -> IntervalUnion:
    # the chi statistic is nonnegative: treat the negative axis as already searched
    if state.dist.is_gaussian:
        return state.searched
    return union(state.searched, IntervalUnion([(-INF, 0.0)]))


def step_size(d: NullDistribution) -> float:
    return STEP_EPS * max(1.0, d.unit)


def _into_gap(free: IntervalUnion, boundary: float, direction: int, eps: float) -> float:
    """Point just past ``boundary`` inside the unsearched part adjacent to it."""
    probe = boundary + direction * 0.5 * eps
    part = free.part_containing(probe)
    if part is None:
        part = free.part_containing(boundary)
    if part is None:
        raise SearchError(f"no unsearched set next to {boundary}")
    lo, hi = part
    if direction > 0:
        return boundary + min(eps, 0.5 * (hi - boundary))
    return boundary - min(eps, 0.5 * (boundary - lo))


def _pick(d: NullDistribution, candidates: list[tuple[float, float]]) -> float:
    # candidates are (key, point); the larger key wins, ties go to larger density then +inf
    best = max(candidates, key=lambda kp: (kp[0], float(d.log_density(kp[1])), kp[1]))
    return best[1]


def select_next(state: SearchState, strategy: Strategy | str) -> float:
    """Next point to query, strictly inside the unsearched set.

    ``pi1`` steps just past the edge of the searched block containing ``t``
    that lies closer to ``t``; ``pi2`` goes to the unsearched point of highest
    null density; ``pi3`` chooses between the two edges of the block containing
    ``t`` by null density.

    Raises:
        SearchExhausted: if the searched set already covers the support.
    """
    strategy = Strategy(strategy)
    d = state.dist
    searched = _effective_searched(state)
    free = complement(searched)
    if not len(free):
        raise SearchExhausted("searched set covers the support")
    eps = step_size(d)

    if strategy is Strategy.PI2:
        mode = d.mode
        if free.part_containing(mode) is not None and searched.part_containing(mode) is None:
            return mode
        anchor = mode
    else:
        anchor = state.t

    block = searched.part_containing(anchor)
    if block is None:
        # only reachable for pi2 with the mode on a degenerate searched point
        block = (anchor, anchor)
    lo, hi = block
    options = []
    if lo > -INF:
        z = _into_gap(free, lo, -1, eps)
        key = -abs(z - state.t) if strategy is Strategy.PI1 else float(d.log_density(z))
        options.append((key, z))
    if hi < INF:
        z = _into_gap(free, hi, +1, eps)
        key = -abs(z - state.t) if strategy is Strategy.PI1 else float(d.log_density(z))
        options.append((key, z))
    if not options:
        raise SearchExhausted("searched set covers the support")
    if strategy is Strategy.PI1:
        # compare distances from t to the edges themselves, not to the offset points
        options = [(-abs((lo if z < lo else hi) - state.t), z) for _, z in options]
    return _pick(d, options)


# search -------------------------------------------------------------------------


def initial_state(t: float, side: TestSide | str, d: NullDistribution, oracle: SelectionOracle) -> SearchState:
    """Query the oracle at ``t`` and initialize ``S = R`` to the returned region."""
    resp = oracle.query(t)
    if not resp.matches_observed:
        raise OracleContractError("oracle does not match the observed output at the observed statistic")
    region = _checked_region(resp, t)
    searched = region
    if not d.is_gaussian:
        searched = union(region, IntervalUnion([(-INF, 0.0)]))
    state = SearchState(float(t), TestSide(side), d, searched, region)
    return state


def _checked_region(resp: OracleResponse, z: float) -> IntervalUnion:
    region = resp.oc_region
    if region.part_containing(z) is not None:
        return region
    gap = region.distance(z)
    if gap > SNAP_EPS * max(1.0, abs(z)):
        raise OracleContractError(f"oracle region {region!r} does not contain the queried point {z}")
    # rounding in the root computation left z just outside: bridge the gap
    i = int(np.argmin(np.minimum(np.abs(region.lo - z), np.abs(region.hi - z))))
    lo, hi = region.parts[i]
    return union(region, IntervalUnion([(min(lo, z), max(hi, z))]))


def step(state: SearchState, oracle: SelectionOracle, z: float, record: bool = True) -> SearchState:
    """Query ``z`` and grow the searched (and, on a match, truncated) set."""
    resp = oracle.query(z)
    region = _checked_region(resp, z)
    searched = union(state.searched, region)
    truncated = union(state.truncated, region) if resp.matches_observed else state.truncated
    new = replace(
        state,
        searched=searched,
        truncated=truncated,
        iteration=state.iteration + 1,
        oracle_calls=state.oracle_calls + 1,
    )
    if record:
        b = bounds(new)
        new = replace(new, trace=state.trace + ((new.iteration, b.lower, b.upper),))
    return new


def is_exhausted(state: SearchState) -> bool:
    return not len(complement(_effective_searched(state)))


@dataclass(frozen=True)
class SearchResult:
    """Outcome of :func:`run`.

    ``decision`` is ``True`` for reject, ``False`` for accept and ``None`` when
    the rule does not decide or the search stopped early (``inconclusive``).
    """

    bounds: BoundsPair
    decision: bool | None
    state: SearchState
    inconclusive: bool = False
    elapsed: float = field(default=0.0, compare=False)

    @property
    def p_lower(self) -> float:
        return self.bounds.lower

    @property
    def p_upper(self) -> float:
        return self.bounds.upper


def run(
    t: float,
    side: TestSide | str,
    d: NullDistribution,
    oracle: SelectionOracle,
    strategy: Strategy | str = Strategy.PI3,
    rule: TerminationRule | None = None,
    max_iters: int = DEFAULT_MAX_ITERS,
    state: SearchState | None = None,
) -> SearchResult:
    """Search the line until ``rule`` fires or nothing is left to search.

    Args:
        t: Observed statistic; the oracle must match the observed output there.
        side: Alternative of the test.
        d: Unconditional null law of the statistic.
        oracle: Selection oracle along the line.
        strategy: How the next query point is chosen.
        rule: Termination rule. ``None`` searches until the support is covered.
        max_iters: Hard cap on the iteration count; hitting it marks the result
            as inconclusive.
        state: Resume from an existing state instead of querying at ``t``.

    Returns:
        The final bounds, the decision for :class:`Decision` rules, and the state.
    """
    start = time.perf_counter()
    if state is None:
        state = initial_state(t, side, d, oracle)
    b = bounds(state)
    if not state.trace:
        state = replace(state, trace=((state.iteration, b.lower, b.upper),))
    inconclusive = False
    while True:
        if rule is not None and rule.done(state, b):
            break
        if is_exhausted(state):
            break
        if state.iteration >= max_iters:
            inconclusive = True
            break
        z = select_next(state, strategy)
        state = step(state, oracle, z)
        _, lo, hi = state.trace[-1]
        b = BoundsPair(lo, hi, state.iteration)

    decision = None
    if isinstance(rule, Decision) and not inconclusive:
        if b.upper < rule.alpha:
            decision = True
        elif b.lower >= rule.alpha:
            decision = False
    return SearchResult(b, decision, state, inconclusive, time.perf_counter() - start)


# baselines ----------------------------------------------------------------------


def exhaustive_range(t: float, d: NullDistribution) -> tuple[float, float]:
    """Fixed search range of the exhaustive baseline."""
    if d.is_gaussian:
        s = d.scale
        if abs(t) <= 20.0 * s:
            return -20.0 * s, 20.0 * s
        w = 10.0 * s + abs(t)
        return -w, w
    if abs(t) <= 100.0:
        return 0.0, 100.0
    return 0.0, 50.0 + abs(t)


def sweep(
    state: SearchState, oracle: SelectionOracle, lo: float, hi: float, max_iters: int = DEFAULT_MAX_ITERS
) -> SearchState:
    """Cover ``[lo, hi]`` left to right, always querying the smallest uncovered point."""
    eps = step_size(state.dist)
    target = IntervalUnion([(lo, hi)])
    while True:
        gaps = intersect(complement(state.searched), target)
        gaps = IntervalUnion([p for p in gaps if p[1] > p[0]])
        if not len(gaps):
            return state
        if state.iteration >= max_iters:
            raise SearchError(f"sweep did not cover [{lo}, {hi}] within {max_iters} iterations")
        g_lo, g_hi = gaps.parts[0]
        if state.searched.part_containing(g_lo) is None:
            z = float(g_lo)
        else:
            z = float(g_lo + min(eps, 0.5 * (g_hi - g_lo)))
        state = step(state, oracle, z, record=False)


def exhaustive_search(
    t: float, side: TestSide | str, d: NullDistribution, oracle: SelectionOracle
) -> SearchState:
    state = initial_state(t, side, d, oracle)
    lo, hi = exhaustive_range(t, d)
    return sweep(state, oracle, lo, hi)


def exhaustive_p(t: float, side: TestSide | str, d: NullDistribution, oracle: SelectionOracle) -> float:
    """Selective p-value from a left-to-right sweep of a fixed range.

    Matching regions found by the sweep make up ``R``; parts of the line the
    sweep never reached count as not selected.
    """
    state = exhaustive_search(t, side, d, oracle)
    return selective_p(t, side, d, state.truncated)


def oc_p(t: float, side: TestSide | str, d: NullDistribution, oracle: SelectionOracle) -> float:
    """Over-conditioned p-value: truncate to the region returned at ``t`` only."""
    resp = oracle.query(t)
    return selective_p(t, side, d, _checked_region(resp, t))


def naive_p(t: float, side: TestSide | str, d: NullDistribution) -> float:
    """Classical p-value ignoring selection."""
    return selective_p(t, side, d, d.support)
