"""Adaptively bounded selective inference.

Selective p-values for a statistic moved along a line ``a + b z``, bounded
from a partial search of the line so that the search can stop as soon as
the answer is settled.
"""

from .confidence import CiBounds, ci_bounds, invert_mu, selective_ci, truncated_cdf_at
from .core import (
    BoundsPair,
    Decision,
    LineParam,
    MaxIters,
    OracleResponse,
    PiecewiseOracle,
    Precision,
    RangeCovered,
    SearchResult,
    SearchState,
    Strategy,
    TestSide,
    bounds,
    exhaustive_p,
    naive_p,
    oc_p,
    run,
)
from .distributions import chi, gaussian, log_mass, mass
from .intervals import IntervalUnion

__version__ = "0.1.0"

__all__ = [
    "BoundsPair",
    "CiBounds",
    "Decision",
    "IntervalUnion",
    "LineParam",
    "MaxIters",
    "OracleResponse",
    "PiecewiseOracle",
    "Precision",
    "RangeCovered",
    "SearchResult",
    "SearchState",
    "Strategy",
    "TestSide",
    "bounds",
    "chi",
    "ci_bounds",
    "exhaustive_p",
    "gaussian",
    "invert_mu",
    "log_mass",
    "mass",
    "naive_p",
    "oc_p",
    "run",
    "selective_ci",
    "truncated_cdf_at",
]
