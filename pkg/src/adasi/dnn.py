"""Piecewise-linear network, saliency split and its selection oracle.

Once every ReLU sign and max-pool winner is fixed, the network is affine in
its input. Along a line ``a + b r`` each intermediate value is then
``c0 + c1 r``, and keeping the pattern (and the thresholded saliency split)
unchanged is a set of linear inequalities in ``r``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DegenerateStatisticError, LineParam, OracleResponse, line_from_eta
from .distributions import NullDistribution
from .intervals import solve_linear_system


class DegenerateSplitError(DegenerateStatisticError):
    """Salient or background region is empty, so the mean-difference test is undefined."""


@dataclass(frozen=True)
class Affine:
    weight: np.ndarray
    bias: np.ndarray


@dataclass(frozen=True)
class Relu:
    pass


@dataclass(frozen=True)
class MaxPool:
    """Non-overlapping ``window x window`` pooling of a square ``side x side`` map."""

    side: int
    window: int = 2

    def index(self) -> np.ndarray:
        """(outputs, window**2) array of flat input indices per pooling window."""
        w, s = self.window, self.side
        if s % w:
            raise ValueError("map side must be divisible by the pooling window")
        grid = np.arange(s * s).reshape(s, s)
        blocks = grid.reshape(s // w, w, s // w, w).transpose(0, 2, 1, 3)
        return blocks.reshape(-1, w * w)


@dataclass(frozen=True)
class PlNet:
    layers: tuple
    input_side: int

    @property
    def n(self) -> int:
        return self.input_side**2


@dataclass(frozen=True)
class ActivationPattern:
    """ReLU on/off masks and max-pool winner positions, layer by layer."""

    pieces: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class SalientSplit:
    salient: frozenset[int]
    background: frozenset[int]
    tau: float


def make_net(d: int, hidden: int = 16, seed: int = 0, bias_scale: float = 0.1) -> PlNet:
    """Desk-scale network: pixel mixing, ReLU, 2x2 max-pool, hidden ReLU layer and a per-pixel head."""
    if d < 2 or d % 2:
        raise ValueError("image side must be an even integer >= 2")
    rng = np.random.default_rng(seed)
    n, m = d * d, (d // 2) ** 2

    def affine(fan_in, fan_out):
        return Affine(rng.standard_normal((fan_out, fan_in)) / np.sqrt(fan_in), bias_scale * rng.standard_normal(fan_out))

    return PlNet((affine(n, n), Relu(), MaxPool(d), affine(m, hidden), Relu(), affine(hidden, n)), d)


def _propagate(net: PlNet, x: np.ndarray, c1: np.ndarray | None = None, constraints: list | None = None):
    """Forward pass; optionally carries the slope ``c1`` along a line and records
    the ``slope * r + intercept <= 0`` inequalities that pin the pattern."""
    v = np.asarray(x, dtype=float)
    c0 = v.copy()  # intercept in r, meaningful only when c1 is given
    pieces = []
    for layer in net.layers:
        if isinstance(layer, Affine):
            v = layer.weight @ v + layer.bias
            if c1 is not None:
                c0 = layer.weight @ c0 + layer.bias
                c1 = layer.weight @ c1
        elif isinstance(layer, Relu):
            on = v > 0
            pieces.append(tuple(on.astype(int)))
            if c1 is not None:
                sign = np.where(on, -1.0, 1.0)
                constraints.append((sign * c1, sign * c0))
                c0, c1 = np.where(on, c0, 0.0), np.where(on, c1, 0.0)
            v = np.where(on, v, 0.0)
        elif isinstance(layer, MaxPool):
            idx = layer.index()
            win = np.argmax(v[idx], axis=1)
            rows = np.arange(idx.shape[0])
            pieces.append(tuple(win))
            if c1 is not None:
                top = idx[rows, win]
                lose = np.ones(idx.shape, dtype=bool)
                lose[rows, win] = False
                loser = idx[lose].reshape(idx.shape[0], -1)
                constraints.append(((c1[loser] - c1[top][:, None]).ravel(), (c0[loser] - c0[top][:, None]).ravel()))
                c0, c1 = c0[top], c1[top]
            v = v[idx[rows, win]]
        else:
            raise TypeError(f"unsupported layer {layer!r}")
    return v, ActivationPattern(tuple(pieces)), c0, c1


def forward_with_pattern(net: PlNet, x) -> tuple[np.ndarray, ActivationPattern]:
    """Saliency map of ``x`` and the activation pattern that produced it."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != net.n:
        raise ValueError(f"expected {net.n} pixels, got {x.size}")
    sal, pattern, _, _ = _propagate(net, x)
    return sal, pattern


def split_regions(saliency, tau: float) -> SalientSplit:
    s = np.asarray(saliency, dtype=float).ravel()
    on = s > tau
    if on.all() or not on.any():
        raise DegenerateSplitError("thresholding leaves one side empty")
    return SalientSplit(frozenset(np.flatnonzero(on).tolist()), frozenset(np.flatnonzero(~on).tolist()), float(tau))


def dnn_eta(split: SalientSplit) -> np.ndarray:
    """Mean of the salient pixels minus mean of the background pixels, as a contrast."""
    n = len(split.salient) + len(split.background)
    eta = np.zeros(n)
    eta[list(split.salient)] = 1.0 / len(split.salient)
    eta[list(split.background)] = -1.0 / len(split.background)
    return eta


def dnn_direction(net: PlNet, image, tau: float, sigma: float = 1.0) -> tuple[SalientSplit, np.ndarray, LineParam, NullDistribution]:
    sal, _ = forward_with_pattern(net, image)
    split = split_regions(sal, tau)
    eta = dnn_eta(split)
    line, d = line_from_eta(eta, np.asarray(image, dtype=float).ravel(), sigma)
    return split, eta, line, d


class DnnOracle:
    """Region of ``r`` keeping both the activation pattern and the salient split fixed."""

    def __init__(self, net: PlNet, tau: float, line: LineParam, split_obs: SalientSplit):
        self.net = net
        self.tau = float(tau)
        self.line = line
        self.observed = split_obs.salient
        self.calls = 0

    def state_at(self, z: float) -> tuple[ActivationPattern, frozenset[int]]:
        sal, pattern = forward_with_pattern(self.net, self.line.point(z))
        return pattern, frozenset(np.flatnonzero(sal > self.tau).tolist())

    def query(self, z: float) -> OracleResponse:
        self.calls += 1
        cons: list = []
        sal, _, c0, c1 = _propagate(self.net, self.line.point(z), self.line.b.astype(float), cons)
        on = sal > self.tau
        sign = np.where(on, -1.0, 1.0)
        cons.append((sign * c1, sign * (c0 - self.tau)))
        slope = np.concatenate([s for s, _ in cons])
        icpt = np.concatenate([c for _, c in cons])
        # constraints were expanded around r = z
        region = solve_linear_system(slope, icpt - slope * z)
        salient = frozenset(np.flatnonzero(on).tolist())
        return OracleResponse(tuple(sorted(salient)), region, salient == self.observed)


def dnn_oracle(net: PlNet, tau: float, line: LineParam, split_obs: SalientSplit) -> DnnOracle:
    return DnnOracle(net, tau, line, split_obs)
