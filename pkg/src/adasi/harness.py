"""Synthetic experiments comparing selective p-value methods.

Each trial draws data, selects a hypothesis, and evaluates every requested
method on it:

``naive``       classical p-value, ignoring selection
``oc``          over-conditioned p-value (region at the observed point only)
``exhaustive``  sweep of a fixed range, then the selective p-value
``prec``        bounded search until the bounds are within ``eps``
``dec``         bounded search until the test decision is settled
"""

from __future__ import annotations

import csv
import json
import math
import time
from collections.abc import Callable, Iterable, Sequence
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import core
from .core import DegenerateStatisticError, SelectionOracle, TestSide
from .distributions import NullDistribution
from .dnn import PlNet, dnn_direction, dnn_oracle, make_net
from .sfs import SfsProblem, chi_direction, run_sfs, sfs_oracle, z_direction

APPS = ("sfs-z", "sfs-chi", "dnn-z")
METHODS = ("naive", "oc", "exhaustive", "prec", "dec")
SEARCH_METHODS = ("prec", "dec")
STRATEGIES = ("pi1", "pi2", "pi3")
CSV_HEADER = ("trial", "seed", "method", "strategy", "p_lower", "p_upper", "decision", "oracle_calls", "wall_time_ms")
NO_STRATEGY = "none"
MAX_RESAMPLES = 1000


class ConfigError(ValueError):
    """Invalid experiment or problem configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    app: str
    delta: float = 0.0
    trials: int = 100
    seed: int = 0
    alpha: float = 0.05
    eps: float = 0.001
    methods: tuple[str, ...] = METHODS
    strategies: tuple[str, ...] = ("pi3",)
    n: int = 100
    p: int = 10
    K: int = 5
    d: int = 8
    tau: float = 0.0
    hidden: int = 16
    net_seed: int = 0
    max_iters: int = core.DEFAULT_MAX_ITERS
    out_path: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "strategies", tuple(self.strategies))
        self.validate()

    def validate(self) -> None:
        if self.app not in APPS:
            raise ConfigError(f"app must be one of {APPS}, got {self.app!r}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not 0.0 < self.eps < 1.0:
            raise ConfigError("eps must lie in (0, 1)")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"unknown or missing methods {bad}; choose from {METHODS}")
        bad = [s for s in self.strategies if s not in STRATEGIES]
        if bad or not self.strategies:
            raise ConfigError(f"unknown or missing strategies {bad}; choose from {STRATEGIES}")
        if self.app.startswith("sfs"):
            if self.n < 1 or self.p < 1 or not 1 <= self.K <= min(self.p, self.n):
                raise ConfigError("need n >= 1, p >= 1 and 1 <= K <= min(n, p)")
        elif self.d < 4 or self.d % 2:
            raise ConfigError("d must be an even integer >= 4")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be positive")


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    method: str
    strategy: str
    p_lower: float
    p_upper: float
    decision: str
    oracle_calls: int
    wall_time_ms: float


@dataclass(frozen=True)
class Hypothesis:
    """A selected hypothesis reduced to the line: statistic, null law, oracle factory."""

    t: float
    dist: NullDistribution
    make_oracle: Callable[[], SelectionOracle]
    side: TestSide = TestSide.TWO_SIDED
    info: dict = field(default_factory=dict)


# data generation ------------------------------------------------------------------


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    """Independent counter-based stream per trial."""
    return np.random.Generator(np.random.Philox(key=trial_key(seed, trial_index)))


def trial_key(seed: int, trial_index: int) -> int:
    return int(seed) ^ int(trial_index)


def gen_sfs_data(n: int, p: int, delta: float, rng: np.random.Generator, K: int | None = None) -> SfsProblem:
    """Gaussian design; the first five coefficients equal ``delta``, the rest zero; unit noise.

    ``K`` defaults to ``min(5, p)``.
    """
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:5] = delta
    D = X @ beta + rng.standard_normal(n)
    return SfsProblem(X, D, 1.0, min(5, p) if K is None else K)


def gen_image(d: int, delta: float, rng: np.random.Generator) -> tuple[np.ndarray, frozenset[int]]:
    """Flattened ``d x d`` image: unit noise plus ``delta`` on a random square of side ``ceil(d / 2)``."""
    if d < 4:
        raise ConfigError("image side must be at least 4")
    side = math.ceil(d / 2)
    i, j = rng.integers(0, d - side + 1, size=2)
    rows, cols = np.meshgrid(np.arange(i, i + side), np.arange(j, j + side), indexing="ij")
    region = frozenset((rows * d + cols).ravel().tolist())
    signal = np.zeros(d * d)
    signal[list(region)] = delta
    return signal + rng.standard_normal(d * d), region


# hypotheses -----------------------------------------------------------------------


def sfs_z_hypothesis(problem: SfsProblem, feature: int) -> Hypothesis:
    history = run_sfs(problem.X, problem.D, problem.K)
    j = int(feature)
    if j not in history.selected:
        raise ConfigError(f"feature {j} was not selected; selected {sorted(history.selected)}")
    _, line, d = z_direction(problem, history, j)
    return Hypothesis(line.z_obs, d, lambda: sfs_oracle(problem, history, line), info={"feature": j, "history": list(history.order)})


def sfs_chi_hypothesis(problem: SfsProblem, group: Sequence[int]) -> Hypothesis:
    history = run_sfs(problem.X, problem.D, problem.K)
    missing = [g for g in group if g not in history.selected]
    if missing:
        raise ConfigError(f"features {missing} were not selected; selected {sorted(history.selected)}")
    _, line, d = chi_direction(problem, history, group)
    info = {"group": sorted(int(g) for g in group), "history": list(history.order)}
    return Hypothesis(line.z_obs, d, lambda: sfs_oracle(problem, history, line), info=info)


def dnn_hypothesis(net: PlNet, image: np.ndarray, tau: float, sigma: float = 1.0) -> Hypothesis:
    split, _, line, d = dnn_direction(net, image, tau, sigma)
    info = {"salient": sorted(split.salient)}
    return Hypothesis(line.z_obs, d, lambda: dnn_oracle(net, tau, line, split), info=info)


def draw_selected(problem: SfsProblem, rng: np.random.Generator) -> int:
    """A uniformly drawn member of the selected set.

    The tests condition on the selected set only, so the tested feature must
    not depend on the selection order (testing the first selected feature
    inflates the null rejection rate several-fold).
    """
    history = run_sfs(problem.X, problem.D, problem.K)
    return int(rng.choice(sorted(history.selected)))


def draw_hypothesis(cfg: ExperimentConfig, rng: np.random.Generator, net: PlNet | None = None) -> tuple[Hypothesis, int]:
    """Draw data until the hypothesis is well defined; returns it with the number of redraws."""
    for redraws in range(MAX_RESAMPLES):
        try:
            if cfg.app == "dnn-z":
                image, _ = gen_image(cfg.d, cfg.delta, rng)
                return dnn_hypothesis(net, image, cfg.tau), redraws
            problem = gen_sfs_data(cfg.n, cfg.p, cfg.delta, rng, cfg.K)
            j = draw_selected(problem, rng)
            if cfg.app == "sfs-z":
                return sfs_z_hypothesis(problem, j), redraws
            return sfs_chi_hypothesis(problem, [j]), redraws
        except DegenerateStatisticError:
            continue
    raise DegenerateStatisticError(f"no well-defined hypothesis after {MAX_RESAMPLES} draws")


# methods --------------------------------------------------------------------------


def _verdict(reject: bool | None) -> str:
    return "na" if reject is None else ("reject" if reject else "accept")


def _bounds_verdict(lo: float, hi: float, alpha: float) -> str:
    if hi < alpha:
        return "reject"
    if lo >= alpha:
        return "accept"
    return "na"


def run_method(
    h: Hypothesis,
    method: str,
    strategy: str = "pi3",
    alpha: float = 0.05,
    eps: float = 0.001,
    max_iters: int = core.DEFAULT_MAX_ITERS,
) -> dict:
    """Evaluate one method on one hypothesis.

    Returns the CSV fields other than trial and seed, plus the final search
    state under ``"state"`` (``None`` for naive and oc).
    """
    start = time.perf_counter()
    state = None
    if method == "naive":
        p = core.naive_p(h.t, h.side, h.dist)
        lo = hi = p
        calls = 1
    elif method == "oc":
        oracle = h.make_oracle()
        lo = hi = core.oc_p(h.t, h.side, h.dist, oracle)
        calls = oracle.calls
    elif method == "exhaustive":
        oracle = h.make_oracle()
        state = core.exhaustive_search(h.t, h.side, h.dist, oracle)
        lo = hi = core.selective_p(h.t, h.side, h.dist, state.truncated)
        calls = oracle.calls
    elif method in SEARCH_METHODS:
        oracle = h.make_oracle()
        rule = core.Precision(eps) if method == "prec" else core.Decision(alpha)
        res = core.run(h.t, h.side, h.dist, oracle, strategy, rule=rule, max_iters=max_iters)
        lo, hi, calls, state = res.p_lower, res.p_upper, oracle.calls, res.state
    else:
        raise ConfigError(f"unknown method {method!r}")
    elapsed = 1e3 * (time.perf_counter() - start)
    if method in SEARCH_METHODS:
        decision = _bounds_verdict(lo, hi, alpha)
    else:
        decision = _verdict(hi < alpha)
    return {
        "method": method,
        "strategy": strategy if method in SEARCH_METHODS else NO_STRATEGY,
        "p_lower": float(lo),
        "p_upper": float(hi),
        "decision": decision,
        "oracle_calls": int(calls),
        "wall_time_ms": elapsed,
        "state": state,
    }


def _method_plan(cfg: ExperimentConfig) -> list[tuple[str, str]]:
    plan = []
    for m in cfg.methods:
        if m in SEARCH_METHODS:
            plan.extend((m, s) for s in cfg.strategies)
        else:
            plan.append((m, NO_STRATEGY))
    return plan


def run_trial(cfg: ExperimentConfig, trial_index: int, net: PlNet | None = None) -> tuple[list[TrialRecord], int]:
    rng = trial_rng(cfg.seed, trial_index)
    h, redraws = draw_hypothesis(cfg, rng, net)
    key = trial_key(cfg.seed, trial_index)
    records = []
    for method, strategy in _method_plan(cfg):
        out = run_method(h, method, strategy, cfg.alpha, cfg.eps, cfg.max_iters)
        out.pop("state")
        records.append(TrialRecord(trial_index, key, **out))
    return records, redraws


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[TrialRecord]
    summary: dict


def summarize(records: Iterable[TrialRecord], config: ExperimentConfig | None = None, redraws: int = 0) -> dict:
    groups: dict[str, list[TrialRecord]] = {}
    for r in records:
        key = r.method if r.strategy == NO_STRATEGY else f"{r.method}/{r.strategy}"
        groups.setdefault(key, []).append(r)
    per_method = {}
    for key, rs in groups.items():
        n = len(rs)
        per_method[key] = {
            "trials": n,
            "rejections": sum(r.decision == "reject" for r in rs),
            "rejection_rate": sum(r.decision == "reject" for r in rs) / n,
            "undecided": sum(r.decision == "na" for r in rs),
            "mean_oracle_calls": float(np.mean([r.oracle_calls for r in rs])),
            "mean_wall_time_ms": float(np.mean([r.wall_time_ms for r in rs])),
        }
    out = {"methods": per_method, "redrawn_trials": redraws}
    if config is not None:
        out["config"] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(config).items()}
    return out


def run_experiment(cfg: ExperimentConfig, progress: Callable[[int], None] | None = None) -> ExperimentResult:
    net = make_net(cfg.d, cfg.hidden, cfg.net_seed) if cfg.app == "dnn-z" else None
    records: list[TrialRecord] = []
    redraws = 0
    for i in range(cfg.trials):
        recs, r = run_trial(cfg, i, net)
        records.extend(recs)
        redraws += r
        if progress is not None:
            progress(i)
    records.sort(key=lambda r: r.trial)
    return ExperimentResult(cfg, records, summarize(records, cfg, redraws))


# reporting ------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def write_csv(records: Iterable[TrialRecord], path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in records:
                w.writerow([_fmt(getattr(r, k)) for k in CSV_HEADER])
    except OSError as exc:
        raise OSError(f"cannot write records to {path}: {exc}") from exc


def read_csv(path) -> list[TrialRecord]:
    types = {f.name: f.type for f in fields(TrialRecord)}
    conv = {"int": int, "float": float, "str": str}
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [TrialRecord(**{k: conv[types[k]](v) for k, v in row.items()}) for row in rows]


def write_summary_json(summary: dict, path) -> None:
    try:
        with open(path, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write summary to {path}: {exc}") from exc
