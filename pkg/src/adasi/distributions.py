"""Null laws of the test statistic and their masses over interval unions.

Two families are supported: a centred Gaussian (selective z-tests) and the chi
distribution (selective chi-tests). All masses are evaluated in log space so
that ratios of far-tail masses stay finite; :func:`mass` is ``exp`` of
:func:`log_mass`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import optimize, special

from .intervals import IntervalUnion

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)

# Gauss-Legendre rule used on intervals too narrow for CDF differences.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_LOG_GL_WEIGHTS = np.log(_GL_WEIGHTS)
# An interval is "narrow" when the log-density varies by less than this across it.
_NARROW = 0.5
# Below this the scipy incomplete gamma underflows; switch to the log-space routine.
_TINY = 1e-280


class Family(str, Enum):
    GAUSSIAN = "gaussian"
    CHI = "chi"


@dataclass(frozen=True)
class NullDistribution:
    """Unconditional null law of the statistic.

    Attributes:
        kind: Distribution family.
        scale: Standard deviation of the Gaussian (``sigma * ||eta||``). Ignored for chi.
        dof: Degrees of freedom of the chi law (``trace P``). Ignored for Gaussian.
    """

    kind: Family
    scale: float = 1.0
    dof: float = 1.0

    def __post_init__(self):
        if self.kind is Family.GAUSSIAN and not self.scale > 0:
            raise ValueError(f"Gaussian scale must be positive, got {self.scale}")
        if self.kind is Family.CHI and not self.dof >= 1:
            raise ValueError(f"chi degrees of freedom must be >= 1, got {self.dof}")

    @property
    def is_gaussian(self) -> bool:
        return self.kind is Family.GAUSSIAN

    @property
    def support(self) -> IntervalUnion:
        if self.is_gaussian:
            return IntervalUnion.real_line()
        return IntervalUnion([(0.0, np.inf)])

    @property
    def mode(self) -> float:
        if self.is_gaussian:
            return 0.0
        return math.sqrt(self.dof - 1.0)

    @property
    def unit(self) -> float:
        """Natural length scale used for search offsets."""
        return self.scale if self.is_gaussian else 1.0

    def density(self, z):
        return density(self, z)

    def log_density(self, z):
        return log_density(self, z)

    def cdf(self, z):
        return cdf(self, z)

    def sf(self, z):
        return sf(self, z)


def gaussian(scale: float = 1.0) -> NullDistribution:
    return NullDistribution(Family.GAUSSIAN, scale=float(scale))


def chi(dof: float) -> NullDistribution:
    return NullDistribution(Family.CHI, dof=float(dof))


# pointwise functions ----------------------------------------------------------


def log_density(d: NullDistribution, z):
    z = np.asarray(z, dtype=float)
    if d.is_gaussian:
        x = z / d.scale
        return -0.5 * x * x - _LOG_SQRT_2PI - math.log(d.scale)
    k = d.dof
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (k - 1.0) * np.log(z) - 0.5 * z * z - (0.5 * k - 1.0) * math.log(2.0) - special.gammaln(0.5 * k)
    if k == 1.0:
        out = np.where(z >= 0, -0.5 * z * z - (0.5 * k - 1.0) * math.log(2.0) - special.gammaln(0.5), out)
    return np.where(z < 0, -np.inf, out)


def density(d: NullDistribution, z):
    """Density of the null law; zero on the negative axis for chi."""
    out = np.exp(log_density(d, z))
    return float(out) if np.ndim(out) == 0 else out


def cdf(d: NullDistribution, z):
    z = np.asarray(z, dtype=float)
    if d.is_gaussian:
        out = special.ndtr(z / d.scale)
    else:
        out = np.where(z <= 0, 0.0, special.gammainc(0.5 * d.dof, 0.5 * np.maximum(z, 0.0) ** 2))
    return float(out) if out.ndim == 0 else out


def sf(d: NullDistribution, z):
    z = np.asarray(z, dtype=float)
    if d.is_gaussian:
        out = special.ndtr(-z / d.scale)
    else:
        out = np.where(z <= 0, 1.0, special.gammaincc(0.5 * d.dof, 0.5 * np.maximum(z, 0.0) ** 2))
    return float(out) if out.ndim == 0 else out


def quantile(d: NullDistribution, q: float) -> float:
    """Inverse CDF by root bracketing on the monotone CDF (absolute CDF error <= 1e-10)."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {q}")
    if d.is_gaussian:
        lo, hi = -40.0 * d.scale, 40.0 * d.scale
    else:
        lo, hi = 0.0, 10.0 + 10.0 * math.sqrt(d.dof)
    return float(optimize.brentq(lambda x: cdf(d, x) - q, lo, hi, xtol=1e-14, maxiter=500))


# log-space incomplete gamma (fallback when scipy underflows) -----------------


def _log_gamma_series(a: float, x: float, log_x: float | None = None) -> float:
    # log P(a, x), valid for x < a + 1; log_x keeps precision when x underflows
    if log_x is None:
        log_x = math.log(x)
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    return math.log(total) - x + a * log_x - math.lgamma(a)


def _log_gamma_cf(a: float, x: float) -> float:
    # log Q(a, x) by the modified Lentz continued fraction, valid for x >= a + 1
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    dd = 1.0 / b
    h = dd
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        dd = an * dd + b
        if abs(dd) < tiny:
            dd = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        dd = 1.0 / dd
        delta = dd * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.log(h) - x + a * math.log(x) - math.lgamma(a)


def log_gammainc_upper(a: float, x: float) -> float:
    """``log Q(a, x)``, the log regularized upper incomplete gamma function."""
    if x <= 0:
        return 0.0
    if math.isinf(x):
        return -math.inf
    if x < a + 1.0:
        return _log1mexp(_log_gamma_series(a, x))
    return _log_gamma_cf(a, x)


def log_gammainc_lower(a: float, x: float) -> float:
    """``log P(a, x)``, the log regularized lower incomplete gamma function."""
    if x <= 0:
        return -math.inf
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return _log_gamma_series(a, x)
    return _log1mexp(_log_gamma_cf(a, x))


def _chi_log_cdf(k: float, z: float) -> float:
    if z <= 0:
        return -math.inf
    a, x = 0.5 * k, 0.5 * z * z
    if x < a + 1.0:
        return _log_gamma_series(a, x, 2.0 * math.log(z) - math.log(2.0))
    return _log1mexp(_log_gamma_cf(a, x))


def _log1mexp(x):
    """``log(1 - exp(x))`` for ``x <= 0``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x > -0.6931471805599453, np.log(-np.expm1(x)), np.log1p(-np.exp(x)))
    return float(out) if out.ndim == 0 else out


# per-part log masses ----------------------------------------------------------


def _log_diff(big: np.ndarray, small: np.ndarray) -> np.ndarray:
    """``log(exp(big) - exp(small))`` for ``small <= big``; ``-inf`` when ``big`` is."""
    with np.errstate(invalid="ignore"):
        out = big + _log1mexp(np.minimum(small - big, 0.0))
    return np.where(np.isneginf(big), -np.inf, out)


def _log_mass_gl(d: NullDistribution, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    logs = log_density(d, nodes) + _LOG_GL_WEIGHTS[None, :]
    with np.errstate(divide="ignore"):
        return special.logsumexp(logs, axis=1) + np.log(half)


def _gaussian_part_logs(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    # standardized endpoints
    out = np.empty_like(lo)
    right = lo >= 0
    left = hi <= 0
    mid = ~right & ~left
    if right.any():
        a = special.log_ndtr(-lo[right])
        b = special.log_ndtr(-hi[right])
        out[right] = _log_diff(a, b)
    if left.any():
        a = special.log_ndtr(hi[left])
        b = special.log_ndtr(lo[left])
        out[left] = _log_diff(a, b)
    if mid.any():
        # erf(y) + erf(-x) adds two positive numbers, no cancellation
        m = 0.5 * (special.erf(hi[mid] / _SQRT2) + special.erf(-lo[mid] / _SQRT2))
        tails = special.ndtr(lo[mid]) + special.ndtr(-hi[mid])
        with np.errstate(divide="ignore"):
            out[mid] = np.where(m < 0.5, np.log(m), np.log1p(-tails))
    return out


def _chi_part_logs(k: float, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    a = 0.5 * k
    lo = np.maximum(lo, 0.0)
    u, v = 0.5 * lo * lo, 0.5 * hi * hi
    out = np.empty_like(lo)
    right = u >= a + 1.0
    left = ~right & (v <= a + 1.0)
    mid = ~right & ~left
    with np.errstate(divide="ignore", invalid="ignore"):
        if right.any():
            qa = special.gammaincc(a, u[right])
            qb = special.gammaincc(a, v[right])
            la, lb = np.log(qa), np.log(qb)
            bad = qa < _TINY
            if bad.any():
                la[bad] = [log_gammainc_upper(a, x) for x in u[right][bad]]
                lb[bad] = [log_gammainc_upper(a, x) for x in v[right][bad]]
            out[right] = _log_diff(la, lb)
        if left.any():
            pb = special.gammainc(a, v[left])
            pa = special.gammainc(a, u[left])
            lb, la = np.log(pb), np.log(pa)
            bad = pb < _TINY
            if bad.any():
                lb[bad] = [_chi_log_cdf(k, z) for z in hi[left][bad]]
                la[bad] = [_chi_log_cdf(k, z) for z in lo[left][bad]]
            out[left] = _log_diff(lb, la)
        if mid.any():
            pa = special.gammainc(a, u[mid])
            qb = special.gammaincc(a, v[mid])
            out[mid] = np.log1p(-(pa + qb))
    return out


def part_log_masses(d: NullDistribution, lo, hi) -> np.ndarray:
    """Log mass of each interval ``[lo_i, hi_i]`` under ``d``."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    out = np.full(lo.shape, -np.inf)
    if not d.is_gaussian:
        lo = np.maximum(lo, 0.0)
    live = hi > lo
    if not live.any():
        return out
    lo, hi = lo[live], hi[live]
    if d.is_gaussian:
        x, y = lo / d.scale, hi / d.scale
        width = y - x
        spread = width * np.maximum(1.0, np.maximum(np.abs(x), np.abs(y)))
    else:
        width = hi - lo
        with np.errstate(over="ignore"):
            pull = (d.dof - 1.0) / np.where(lo > 0, lo, 1.0)
        grad = np.maximum.reduce([np.ones_like(lo), hi, pull])
        spread = np.where(lo > 0, width * grad, np.inf)
    narrow = np.isfinite(spread) & (spread <= _NARROW)
    res = np.empty(lo.shape)
    if narrow.any():
        res[narrow] = _log_mass_gl(d, lo[narrow], hi[narrow])
    wide = ~narrow
    if wide.any():
        if d.is_gaussian:
            res[wide] = _gaussian_part_logs(x[wide], y[wide])
        else:
            res[wide] = _chi_part_logs(d.dof, lo[wide], hi[wide])
    out[live] = res
    return out


def log_mass(d: NullDistribution, region: IntervalUnion) -> float:
    """Natural log of the probability of ``region``; ``-inf`` for the empty set."""
    if not len(region):
        return -math.inf
    logs = part_log_masses(d, region.lo, region.hi)
    if np.isnan(logs).any():
        raise FloatingPointError(f"mass evaluation failed on {region!r} under {d}")
    top = float(logs.max())
    if top == -math.inf:
        return -math.inf
    # plain log-sum-exp; the scipy version is dominated by dispatch on tiny arrays
    return min(0.0, top + math.log(float(np.exp(logs - top).sum())))


def mass(d: NullDistribution, region: IntervalUnion) -> float:
    """Probability of ``region`` under ``d`` (in ``[0, 1]``)."""
    return math.exp(log_mass(d, region))


_STANDARD = gaussian(1.0)


def shifted_log_gaussian_mass(mu: float, region: IntervalUnion) -> float:
    """Log of the ``N(mu, 1)`` probability of ``region``."""
    return log_mass(_STANDARD, region.shift(-mu))


def shifted_gaussian_mass(mu: float, region: IntervalUnion) -> float:
    """``N(mu, 1)`` probability of ``region``."""
    return math.exp(shifted_log_gaussian_mass(mu, region))


def log_ratio(log_num: float, log_den: float) -> float:
    """``exp(log_num - log_den)`` clipped to ``[0, 1]``; nan when the denominator is null."""
    if log_den == -math.inf:
        return math.nan
    if log_num == -math.inf:
        return 0.0
    return min(1.0, math.exp(log_num - log_den))
