"""Forward stepwise feature selection and its selection oracle.

Along the line ``a + b r`` every residual is affine in ``r``, so the criterion
difference between the selected feature and any competitor is a quadratic in
``r``. The region on which the whole selection history is unchanged is the
intersection of those quadratic inequalities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .core import DegenerateStatisticError, LineParam, OracleResponse, line_from_eta
from .distributions import NullDistribution, chi
from .intervals import IntervalUnion, solve_quadratic_system

#: Relative column norm below which a candidate is treated as collinear.
RANK_TOL = 1e-10


class SingularDesignError(ValueError):
    """A column subset used by the selection path is rank deficient."""


@dataclass(frozen=True)
class SfsProblem:
    X: np.ndarray
    D: np.ndarray
    sigma: float
    K: int

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        D = np.asarray(self.D, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != D.shape[0]:
            raise ValueError(f"X must be n x p with n = len(D); got {X.shape} and {D.shape}")
        if not 1 <= self.K <= X.shape[1]:
            raise ValueError(f"K must lie in [1, {X.shape[1]}]")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "D", D)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class SfsHistory:
    """Selected feature indices (0-based) in order of entry."""

    order: tuple[int, ...]

    @property
    def selected(self) -> frozenset[int]:
        return frozenset(self.order)

    def __len__(self) -> int:
        return len(self.order)


def _greedy_path(X: np.ndarray, vecs: np.ndarray, K: int, lead: int = 0):
    """Run the greedy path on ``vecs[lead]`` while residualizing all of ``vecs``.

    Yields, for each step, the selected index, the still-eligible indices and
    the projections of every residualized vector on the normalized
    residualized candidate columns.
    """
    R = X.copy()
    V = np.array(vecs, dtype=float, copy=True)
    norms0 = np.linalg.norm(X, axis=0)
    eligible = np.ones(X.shape[1], dtype=bool)
    for _ in range(K):
        cn = np.linalg.norm(R, axis=0)
        cand = np.flatnonzero(eligible)
        if np.any(cn[cand] <= RANK_TOL * np.maximum(norms0[cand], 1.0)):
            raise SingularDesignError("candidate column is collinear with the selected set")
        U = R[:, cand] / cn[cand]
        proj = U.T @ V.T  # (candidates, vectors)
        score = proj[:, lead] ** 2
        best = int(np.argmax(score))  # first maximum, i.e. smallest index
        yield int(cand[best]), cand, proj, best
        u = U[:, best]
        R -= np.outer(u, u @ R)
        V -= np.outer(V @ u, u)
        eligible[cand[best]] = False


def run_sfs(X, D, K: int) -> SfsHistory:
    """Greedy forward selection of ``K`` features by residual sum of squares."""
    X = np.asarray(X, dtype=float)
    D = np.asarray(D, dtype=float).ravel()
    if not 1 <= K <= X.shape[1]:
        raise ValueError("K out of range")
    return SfsHistory(tuple(j for j, *_ in _greedy_path(X, D[None, :], K)))


def _check_members(problem: SfsProblem, history: SfsHistory, idx) -> list[int]:
    pos = {j: i for i, j in enumerate(history.order)}
    missing = [j for j in idx if j not in pos]
    if missing:
        raise ValueError(f"features {missing} were not selected")
    return [pos[j] for j in idx]


def z_direction(problem: SfsProblem, history: SfsHistory, j: int) -> tuple[np.ndarray, LineParam, NullDistribution]:
    """Contrast for the partial regression coefficient of selected feature ``j``."""
    (k,) = _check_members(problem, history, [j])
    Q, Rm = np.linalg.qr(problem.X[:, list(history.order)])
    diag = np.abs(np.diag(Rm))
    if np.any(diag <= RANK_TOL * max(diag.max(), 1.0)):
        raise SingularDesignError("selected design is rank deficient")
    e = np.zeros(len(history))
    e[k] = 1.0
    eta = Q @ solve_triangular(Rm, e, trans="T")
    line, d = line_from_eta(eta, problem.D, problem.sigma)
    return eta, line, d


def chi_direction(problem: SfsProblem, history: SfsHistory, g) -> tuple[np.ndarray, LineParam, NullDistribution]:
    """Projector onto the part of ``X_g`` not explained by the other selected features."""
    g = sorted(set(int(x) for x in g))
    if not g:
        raise ValueError("g must be nonempty")
    _check_members(problem, history, g)
    rest = [j for j in history.order if j not in g]
    Xg = problem.X[:, g]
    if rest:
        Q0, _ = np.linalg.qr(problem.X[:, rest])
        Xg = Xg - Q0 @ (Q0.T @ Xg)
    U, s, _ = np.linalg.svd(Xg, full_matrices=False)
    rank = int(np.sum(s > RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
    if rank == 0:
        raise DegenerateStatisticError("tested columns are explained by the other selected features")
    U = U[:, :rank]
    P = U @ U.T
    pd = U @ (U.T @ problem.D)
    norm = float(np.linalg.norm(pd))
    if norm <= RANK_TOL * max(float(np.linalg.norm(problem.D)), 1e-300):
        raise DegenerateStatisticError("projection of the data is zero")
    a = problem.D - pd
    b = problem.sigma * pd / norm
    return P, LineParam(a, b, norm / problem.sigma), chi(rank)


class SfsOracle:
    """Selection oracle for forward selection along a line.

    The returned region fixes the full ordered history; a point matches when
    the selected set equals the observed one.
    """

    def __init__(self, problem: SfsProblem, history_obs: SfsHistory, line: LineParam):
        self.X = problem.X
        self.K = len(history_obs)
        self.observed = history_obs.selected
        self.line = line
        self.calls = 0
        self._cache: dict[tuple[int, ...], IntervalUnion] = {}

    def history_at(self, z: float) -> SfsHistory:
        return run_sfs(self.X, self.line.point(z), self.K)

    def _region(self, z: float) -> tuple[tuple[int, ...], IntervalUnion]:
        vecs = np.vstack([self.line.point(z), self.line.a, self.line.b])
        order, a2s, a1s, a0s = [], [], [], []
        for j, cand, proj, best in _greedy_path(self.X, vecs, self.K):
            order.append(j)
            pa, pb = proj[:, 1], proj[:, 2]
            others = np.arange(len(cand)) != best
            # (pa_j + pb_j r)^2 - (pa_k + pb_k r)^2 <= 0
            a2s.append(pb[others] ** 2 - pb[best] ** 2)
            a1s.append(2.0 * (pa[others] * pb[others] - pa[best] * pb[best]))
            a0s.append(pa[others] ** 2 - pa[best] ** 2)
        key = tuple(order)
        region = self._cache.get(key)
        if region is None:
            if len(a2s):
                region = solve_quadratic_system(np.concatenate(a2s), np.concatenate(a1s), np.concatenate(a0s))
            else:
                region = IntervalUnion.real_line()
            self._cache[key] = region
        return key, region

    def query(self, z: float) -> OracleResponse:
        self.calls += 1
        order, region = self._region(z)
        selected = frozenset(order)
        return OracleResponse(tuple(sorted(selected)), region, selected == self.observed)


def sfs_oracle(problem: SfsProblem, history_obs: SfsHistory, line: LineParam) -> SfsOracle:
    return SfsOracle(problem, history_obs, line)
