"""Bounded selective confidence intervals for the Gaussian (z-test) case.

A confidence bound ``mu_c`` solves ``c = P_mu(Z <= t | Z in R)``. While the
truncated set is only partially known, the two extreme completions of the
unsearched region give a lower and an upper bound on ``mu_c``, both obtained
by a monotone root search in ``mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import SearchState
from .distributions import shifted_log_gaussian_mass
from .intervals import IntervalUnion

INF = math.inf
MU_TOL = 1e-6
RATIO_TOL = 1e-8
MAX_DOUBLINGS = 60
_MAX_BISECT = 200


class DegenerateRegionError(ValueError):
    """The conditioning region carries no probability mass."""


class UnboundedMuError(ArithmeticError):
    """No finite ``mu`` brackets the requested level."""


@dataclass(frozen=True)
class CiBounds:
    c: float
    mu_lower: float
    mu_upper: float


def _below(t: float) -> IntervalUnion:
    return IntervalUnion.interval(-INF, t)


def _log_ratio_fn(num: IntervalUnion, den: IntervalUnion):
    def f(mu: float) -> float:
        ld = shifted_log_gaussian_mass(mu, den)
        if ld == -INF:
            raise DegenerateRegionError("denominator region has zero mass")
        ln = shifted_log_gaussian_mass(mu, num)
        return min(ln - ld, 0.0)

    return f


def truncated_cdf_at(mu: float, region: IntervalUnion, t: float) -> float:
    """``P(Z <= t | Z in region)`` for ``Z ~ N(mu, 1)``."""
    return math.exp(_log_ratio_fn(region & _below(t), region)(mu))


def invert_mu(target_c: float, num_region: IntervalUnion, den_region: IntervalUnion, t: float) -> float:
    """Find ``mu`` where ``I_mu(num ∩ (-inf, t]) / I_mu(den)`` equals ``target_c``.

    The ratio must be nonincreasing in ``mu``. The bracket grows as
    ``t +/- 2**k`` and is then bisected.
    """
    if not 0.0 < target_c < 1.0:
        raise ValueError("target_c must lie in (0, 1)")
    f = _log_ratio_fn(num_region & _below(t), den_region)
    log_c = math.log(target_c)

    f(t)  # raises on a null denominator

    def probe(mu):
        try:
            return f(mu)
        except DegenerateRegionError:
            return math.nan  # mass lost to rounding far from the region

    lo = hi = None
    for k in range(MAX_DOUBLINGS + 1):
        step = 2.0**k
        if lo is None and probe(t - step) >= log_c:
            lo = t - step
        if hi is None and probe(t + step) <= log_c:
            hi = t + step
        if lo is not None and hi is not None:
            break
    if lo is None or hi is None:
        raise UnboundedMuError(f"level {target_c} not bracketed within t +/- 2^{MAX_DOUBLINGS}")

    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break  # float resolution exhausted
        v = f(mid)
        if hi - lo <= MU_TOL and abs(math.exp(v) - target_c) <= RATIO_TOL:
            return mid
        if v >= log_c:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _standardized(state: SearchState):
    d = state.dist
    if not d.is_gaussian:
        raise ValueError("confidence intervals are available for Gaussian statistics only")
    s = d.scale
    return s, state.t / s, state.truncated.scale(1.0 / s), state.unsearched.scale(1.0 / s)


def ci_bounds(c: float, state: SearchState) -> CiBounds:
    """Bounds on ``mu_c`` valid for every completion of the unsearched set.

    Results are in the units of the statistic (the search state's scale).
    """
    s, t, r, free = _standardized(state)
    below, above = _below(t), IntervalUnion.interval(t, INF)
    mu_lo = invert_mu(c, r, r | (free & above), t)
    mu_hi = invert_mu(c, r | free, r | (free & below), t)
    return CiBounds(c, s * mu_lo, s * max(mu_lo, mu_hi))


def selective_ci(alpha: float, state: SearchState) -> tuple[tuple[float, float], tuple[float, float]]:
    """Outer and inner bounds on the ``1 - alpha`` selective interval.

    The outer interval contains the exact selective interval and the inner one
    is contained in it. The inner interval may be empty (lower > upper).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    left = ci_bounds(1.0 - alpha / 2.0, state)
    right = ci_bounds(alpha / 2.0, state)
    return (left.mu_lower, right.mu_upper), (left.mu_upper, right.mu_lower)
