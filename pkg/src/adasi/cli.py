"""Command-line entry point: ``adasi experiment`` and ``adasi test``.

Exit status is 0 on success, 2 for configuration errors and 3 when the
requested statistic is undefined for the data.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import harness
from .confidence import UnboundedMuError, selective_ci
from .core import DegenerateStatisticError
from .dnn import make_net
from .sfs import SfsProblem, SingularDesignError

EXIT_OK, EXIT_CONFIG, EXIT_DEGENERATE = 0, 2, 3


def _csv_list(text: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adasi", description="Selective inference with bounded p-values.")
    sub = ap.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("experiment", help="run a synthetic experiment and write per-trial CSV")
    ex.add_argument("--app", required=True, choices=harness.APPS)
    ex.add_argument("--delta", type=float, default=0.0)
    ex.add_argument("--trials", type=int, default=100)
    ex.add_argument("--seed", type=int, default=0)
    ex.add_argument("--alpha", type=float, default=0.05)
    ex.add_argument("--eps", type=float, default=0.001)
    ex.add_argument("--methods", type=_csv_list, default=harness.METHODS)
    ex.add_argument("--strategies", type=_csv_list, default=("pi3",))
    ex.add_argument("--n", type=int, default=100)
    ex.add_argument("--p", type=int, default=10)
    ex.add_argument("--K", type=int, default=5)
    ex.add_argument("--d", type=int, default=8)
    ex.add_argument("--tau", type=float, default=0.0)
    ex.add_argument("--net-seed", type=int, default=0)
    ex.add_argument("--max-iters", type=int, default=harness.core.DEFAULT_MAX_ITERS)
    ex.add_argument("--out", required=True, help="CSV output path")
    ex.add_argument("--summary", help="JSON summary path (printed to stdout when omitted)")

    te = sub.add_parser("test", help="single selective test on a problem file")
    te.add_argument("--input", required=True, help="problem JSON")
    te.add_argument("--method", default="dec", choices=harness.METHODS)
    te.add_argument("--strategy", default="pi3", choices=harness.STRATEGIES)
    te.add_argument("--alpha", type=float, default=0.05)
    te.add_argument("--eps", type=float, default=0.001)
    te.add_argument("--ci", action="store_true", help="also report confidence interval bounds (z-tests)")
    return ap


def _experiment(args) -> int:
    cfg = harness.ExperimentConfig(
        app=args.app,
        delta=args.delta,
        trials=args.trials,
        seed=args.seed,
        alpha=args.alpha,
        eps=args.eps,
        methods=args.methods,
        strategies=args.strategies,
        n=args.n,
        p=args.p,
        K=args.K,
        d=args.d,
        tau=args.tau,
        net_seed=args.net_seed,
        max_iters=args.max_iters,
        out_path=args.out,
    )
    result = harness.run_experiment(cfg)
    harness.write_csv(result.records, args.out)
    if args.summary:
        harness.write_summary_json(result.summary, args.summary)
    else:
        json.dump(result.summary, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return EXIT_OK


def _require(problem: dict, *keys):
    missing = [k for k in keys if k not in problem]
    if missing:
        raise harness.ConfigError(f"problem file lacks {missing}")


def load_hypothesis(problem: dict) -> harness.Hypothesis:
    """Build the selected hypothesis described by a problem dictionary.

    Feature and pixel indices are 0-based.
    """
    app = problem.get("app")
    if app in ("sfs-z", "sfs-chi"):
        _require(problem, "X", "D", "K")
        try:
            sfs = SfsProblem(np.array(problem["X"], dtype=float), np.array(problem["D"], dtype=float), float(problem.get("sigma", 1.0)), int(problem["K"]))
        except ValueError as exc:
            raise harness.ConfigError(str(exc)) from exc
        if app == "sfs-z":
            _require(problem, "target_feature")
            return harness.sfs_z_hypothesis(sfs, int(problem["target_feature"]))
        _require(problem, "target_features")
        return harness.sfs_chi_hypothesis(sfs, [int(g) for g in problem["target_features"]])
    if app == "dnn-z":
        _require(problem, "image")
        image = np.array(problem["image"], dtype=float).ravel()
        d = int(round(np.sqrt(image.size)))
        if d * d != image.size or d < 2 or d % 2:
            raise harness.ConfigError("image must be a flattened d x d array with even d")
        net = make_net(d, int(problem.get("hidden", 16)), int(problem.get("net_seed", 0)))
        return harness.dnn_hypothesis(net, image, float(problem.get("tau", 0.0)), float(problem.get("sigma", 1.0)))
    raise harness.ConfigError(f"app must be one of {harness.APPS}, got {app!r}")


def _test(args) -> int:
    if not 0 < args.alpha < 1 or not 0 < args.eps < 1:
        raise harness.ConfigError("alpha and eps must lie in (0, 1)")
    try:
        with open(args.input) as fh:
            problem = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise harness.ConfigError(f"cannot read {args.input}: {exc}") from exc
    h = load_hypothesis(problem)
    out = harness.run_method(h, args.method, args.strategy, args.alpha, args.eps)
    state = out.pop("state")
    out.update(statistic=h.t, null=h.dist.kind.value, dof=h.dist.dof if not h.dist.is_gaussian else None, **h.info)
    if args.ci:
        if state is None or not h.dist.is_gaussian:
            raise harness.ConfigError("--ci needs a z-test and a search method (exhaustive, prec or dec)")
        try:
            outer, inner = selective_ci(args.alpha, state)
            out["ci_outer"], out["ci_inner"] = list(outer), list(inner)
        except UnboundedMuError as exc:
            out["ci_error"] = str(exc)
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _experiment(args) if args.command == "experiment" else _test(args)
    except (harness.ConfigError, SingularDesignError) as exc:
        print(f"adasi: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateStatisticError as exc:
        print(f"adasi: degenerate statistic: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except OSError as exc:
        print(f"adasi: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
