"""Command-line entry point: ``sbmlab <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .abp import abp_multiclass_seed, abp_star
from .estimation import EstimationFailure, estimate_ssbm_2
from .exact import FIRST_ROUNDS, exact_success, two_round_exact
from .graph import GraphError, read_edgelist, write_edgelist
from .metrics import agreement, partition_to_labels, read_labels, separation
from .model import ParameterError, load_params, parse_ssbm, sample_sbm
from .spectral import (adjacency_second_eigvec, laplacian_second_eigvec, nb_power_detect,
                       nb_second_eigvec_detect)
from .sphere import agnostic_sphere_compare
from .thresholds import threshold_report
from .tree import Offspring, eps_for_ks_ratio, estimate_detection

DETECT_METHODS = ("abp", "nb-power", "nb-eig", "adjacency", "laplacian", "sphere",
                  "sphere-count", "sphere-known", "adj", "lap")
ALIASES = {"adj": "adjacency", "lap": "laplacian"}
GLOBAL_DEFAULTS = {"seed": 0, "workers": 1, "out": None}


class _Output:
    """Writes to ``--out`` when given, else stdout."""

    def __init__(self, path):
        self.path = path

    def write(self, text: str) -> None:
        if self.path:
            Path(self.path).write_text(text)
        else:
            sys.stdout.write(text)


def _params(args):
    if getattr(args, "params", None):
        return load_params(args.params)
    if getattr(args, "ssbm", None):
        return parse_ssbm(args.ssbm, args.regime)
    raise ParameterError("give --params FILE or --ssbm k,a,b")


def _add_params(p, required=True):
    group = p.add_mutually_exclusive_group(required=required)
    group.add_argument("--params", help="JSON parameter file (k, p, q row-major, regime)")
    group.add_argument("--ssbm", help="symmetric model as k,a,b")
    p.add_argument("--regime", default="constant", choices=("constant", "logarithmic", "explicit"),
                   help="scaling of --ssbm values (default: constant)")


def cmd_generate(args) -> int:
    params = _params(args)
    labels, g = sample_sbm(params, args.n, args.seed, balanced=args.balanced)
    if args.out:
        write_edgelist(g, args.out)
    else:
        sys.stdout.write("".join(f"{u} {v}\n" for u, v in g.edge_array()))
    if args.labels_out:
        Path(args.labels_out).write_text("".join(f"{x}\n" for x in labels))
    print(f"n={g.n} edges={g.num_edges}", file=sys.stderr)
    return 0


def _detect_labels(g, args):
    """Labels from the chosen method; None when a sphere method declines."""
    method = ALIASES.get(args.method, args.method)
    if method in ("sphere", "sphere-count"):
        stat = "count" if method == "sphere-count" else "invariant"
        out = agnostic_sphere_compare(g, args.delta, seed=args.seed, statistic=stat)
        if not out.ok:
            print(f"sphere comparison declined: {out.reason}", file=sys.stderr)
            return None
        return out.labels
    params = _params(args) if (args.params or args.ssbm) else None
    if method == "sphere-known":
        if params is None:
            raise ParameterError("sphere-known needs --params or --ssbm")
        return harness.METHODS[method](g, params, args.seed)
    k = params.k if params is not None else args.k
    if method == "abp" and k > 2:
        return abp_multiclass_seed(g, m=args.m, r=args.r, k=k, seed=args.seed)
    if method == "abp":
        res = abp_star(g, m=args.m, r=args.r, bias_mode=args.bias, seed=args.seed)
    elif method == "nb-power":
        res = nb_power_detect(g, r=args.r, m=args.m, seed=args.seed)
    elif method == "nb-eig":
        res = nb_second_eigvec_detect(g, r=args.r, seed=args.seed)
    elif method == "adjacency":
        res = adjacency_second_eigvec(g)
    else:
        res = laplacian_second_eigvec(g)
    return partition_to_labels(res.partition)


def cmd_detect(args) -> int:
    g = read_edgelist(args.edges, args.n)
    labels = _detect_labels(g, args)
    if labels is None:
        return 1
    lines = [f"{v} {int(x)}\n" for v, x in enumerate(labels)]
    sizes = np.bincount(labels, minlength=int(labels.max()) + 1)[1:]
    footer = f"# method={args.method} n={g.n} edges={g.num_edges} sizes={','.join(map(str, sizes))}"
    if args.truth:
        truth = read_labels(args.truth, g.n)
        footer += f" agreement={agreement(truth, labels):.6f}"
        if labels.max() <= 2 and truth.max() <= 2:
            footer += f" separation={separation(truth, labels == 1):.6f}"
    _Output(args.out).write("".join(lines) + footer + "\n")
    return 0


def cmd_exact(args) -> int:
    params = _params(args)
    rows = []
    for t in range(args.trials):
        seed = harness.rngmod.child_seed(args.seed, "exact-cli", t)
        truth, g = sample_sbm(params, args.n, seed)
        try:
            res = two_round_exact(g, params, args.first_round, seed=seed)
            rows.append((t, seed, int(exact_success(truth, res.labels)),
                         f"{agreement(truth, res.labels):.10g}", res.ties, "ok"))
        except Exception as exc:
            rows.append((t, seed, "", "", "", f"error:{type(exc).__name__}"))
    buf = [",".join(("trial", "seed", "success", "agreement", "ties", "status"))]
    buf += [",".join(map(str, r)) for r in rows]
    _Output(args.out).write("\n".join(buf) + "\n")
    return 0


def cmd_thresholds(args) -> int:
    report = threshold_report(_params(args), args.n)
    if args.json:
        text = json.dumps(report.as_dict(), indent=2) + "\n"
    else:
        text = report.to_text()
    _Output(args.out).write(text)
    return 0


def cmd_estimate(args) -> int:
    g = read_edgelist(args.edges, args.n)
    try:
        est = estimate_ssbm_2(g, args.m, args.method)
    except EstimationFailure as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return 1
    _Output(args.out).write(
        "d_hat,f_hat,a_hat,b_hat,m,cycles\n"
        f"{est.d_hat!r},{est.f_hat!r},{est.a_hat!r},{est.b_hat!r},{est.m},{est.cycles}\n")
    return 0


def cmd_tree(args) -> int:
    offspring = Offspring.parse(args.offspring)
    eps = args.eps if args.eps is not None else eps_for_ks_ratio(offspring.c, args.ratio)
    est = estimate_detection(offspring, eps, args.depth, args.trials, args.seed)
    _Output(args.out).write(
        f"eps = {eps!r}\nbp_advantage = {est.bp_advantage!r}\n"
        f"bp_advantage_se = {est.bp_advantage_se!r}\ncensus_accuracy = {est.census_accuracy!r}\n"
        f"census_accuracy_se = {est.census_accuracy_se!r}\ntrials = {est.trials}\n")
    return 0


def cmd_sweep(args) -> int:
    if args.config:
        config = harness.SweepConfig.load(args.config)
    else:
        kwargs = {"seed": args.seed}
        if args.trials is not None:
            kwargs["trials"] = args.trials
        if args.n is not None:
            kwargs["n"] = args.n
        if args.methods:
            kwargs["methods"] = tuple(args.methods.split(","))
        config = harness.RECIPES[args.recipe](**kwargs)
    if args.timing:
        config = harness.SweepConfig(config.points, config.methods, config.trials, config.seed,
                                     config.metrics, True, config.out)
    rows = harness.run_sweep(config, workers=args.workers)
    out = args.out or config.out
    _Output(out).write(harness.rows_to_csv(rows))
    if args.summary:
        for point, method, metric, mean, ok, total in harness.summarize(rows):
            print(f"{point}\t{method}\t{metric}\tmean={mean:.4f}\tok={ok}/{total}", file=sys.stderr)
    return 0


def cmd_ingest(args) -> int:
    report = harness.ingest(args.edges, args.labels, args.regime)
    _Output(args.out).write(report.to_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="base random seed")
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS,
                        help="worker processes for sweeps")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output file (default stdout)")

    parser = argparse.ArgumentParser(prog="sbmlab", parents=[common],
                                     description="Community detection in stochastic block models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="sample an SBM graph")
    _add_params(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--balanced", action="store_true", help="exact community sizes")
    p.add_argument("--labels-out", help="write planted labels here")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("detect", parents=[common], help="cluster an edge list")
    p.add_argument("--edges", required=True)
    p.add_argument("--n", type=int, help="vertex count (default: largest id + 1)")
    p.add_argument("--method", choices=DETECT_METHODS, default="abp")
    p.add_argument("--k", type=int, default=2, help="communities for abp (default 2)")
    p.add_argument("--r", type=int, default=2, help="nonbacktracking order (default 2)")
    p.add_argument("--m", type=int, help="iterations (default from n and the graph)")
    p.add_argument("--bias", choices=("center", "matrix"), default="center",
                   help="abp bias removal (default center)")
    p.add_argument("--delta", type=float, default=0.4,
                   help="lower bound on community fractions (sphere methods, default 0.4)")
    p.add_argument("--truth", help="labels file; prints agreement")
    _add_params(p, required=False)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("exact", parents=[common], help="two-round exact recovery trials")
    _add_params(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--first-round", choices=FIRST_ROUNDS, default="abp")
    p.add_argument("--trials", type=int, default=1)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("thresholds", parents=[common], help="recovery thresholds of a model")
    _add_params(p)
    p.add_argument("--n", type=int, help="graph size for finite-n quantities")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("estimate", parents=[common], help="estimate (a, b) from cycle counts")
    p.add_argument("--edges", "--input", dest="edges", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int, help="cycle length (default from n)")
    p.add_argument("--method", choices=("exact-dfs", "nb-closed-walk"), default="exact-dfs")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("tree", parents=[common], help="broadcast-on-tree detection estimate")
    p.add_argument("--offspring", default="fixed:3", help="poisson:C or fixed:C")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--eps", type=float, help="flip probability")
    group.add_argument("--ratio", type=float, help="target c (1 - 2 eps)^2")
    p.add_argument("--depth", type=int, default=10)
    p.add_argument("--trials", type=int, default=1000)
    p.set_defaults(func=cmd_tree)

    p = sub.add_parser("sweep", parents=[common], help="run a parameter sweep to CSV")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--config", help="JSON sweep configuration")
    group.add_argument("--recipe", choices=sorted(harness.RECIPES))
    p.add_argument("--trials", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--methods", help="comma-separated method names (recipes only)")
    p.add_argument("--timing", action="store_true", help="fill the ms column (not reproducible)")
    p.add_argument("--summary", action="store_true", help="print per-point means to stderr")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ingest", parents=[common], help="read a graph and optional labels")
    p.add_argument("--edges", required=True)
    p.add_argument("--labels")
    p.add_argument("--regime", default="constant", choices=("constant", "logarithmic", "explicit"))
    p.set_defaults(func=cmd_ingest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    # the global flags are shared with every subparser and default to
    # SUPPRESS so a later position cannot clobber an earlier one
    for name, default in GLOBAL_DEFAULTS.items():
        if not hasattr(args, name):
            setattr(args, name, default)
    try:
        return args.func(args)
    except (OSError, ValueError, GraphError, ParameterError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
