"""Command line entry point: ``sicomore {run,simulate,benchmark,explore,theorem-check}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import ConfigError, NumericalError, SicomoreError


def _add_run_flags(p):
    p.add_argument("--config", help="flat TOML file; flags override its values")
    p.add_argument("--x-G", dest="x_G", help="view G table (samples x variables)")
    p.add_argument("--x-M", dest="x_M", help="view M table of counts")
    p.add_argument("--y", help="response table (one column)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--clr", dest="clr", action="store_const", const=True, default=None,
                   help="CLR-transform view M (default)")
    p.add_argument("--no-clr", dest="clr", action="store_const", const=False)
    p.add_argument("--pseudocount", type=float)
    p.add_argument("--screen-keep", dest="screen_keep", type=float,
                   help="fraction of variables kept by single-effect screening")
    p.add_argument("--summary", choices=("mean", "median", "pca1"))
    p.add_argument("--restrict-factor", dest="restrict_factor", type=float)
    p.add_argument("--lambda-min-ratio", dest="lambda_min_ratio", type=float)
    p.add_argument("--n-lambda", dest="n_lambda", type=int)
    p.add_argument("--select", choices=("cv10", "bic"))
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--correction", choices=("holm", "bh"))
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)


RUN_KEYS = ("x_G", "x_M", "y", "out", "clr", "pseudocount", "screen_keep", "summary", "restrict_factor",
            "lambda_min_ratio", "n_lambda", "select", "tol", "max_iter", "alpha", "correction", "seed",
            "threads")


def _pipeline_config(args):
    from .pipeline import PipelineConfig, load_config

    values = load_config(args.config) if args.config else {}
    for key in RUN_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    try:
        return PipelineConfig.from_mapping(values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def cmd_run(args):
    from .pipeline import run_pipeline

    cfg = _pipeline_config(args)
    result, manifest = run_pipeline(cfg)
    print(f"{result.report.n_hits} interaction(s) among {len(result.report.pairs)} tested pair(s); "
          f"outputs in {cfg.out}")
    return 0


def cmd_simulate(args):
    from .model import write_dataset, write_response
    from .simulate import simulate_scenario

    sc = simulate_scenario(args.n_samples, args.sigma, args.interactions, seed=args.seed,
                           d_G=args.d_G, d_M=args.d_M, null=args.null)
    os.makedirs(args.out, exist_ok=True)
    write_dataset(os.path.join(args.out, "x_G.tsv"), sc.x_G)
    write_dataset(os.path.join(args.out, "x_M.tsv"), sc.x_M)
    write_response(os.path.join(args.out, "y.tsv"), sc.y)
    with open(os.path.join(args.out, "truth.json"), "w", encoding="utf-8") as fh:
        fh.write(sc.truth_json())
    print(f"wrote x_G.tsv, x_M.tsv, y.tsv, truth.json to {args.out}")
    return 0


def cmd_benchmark(args):
    from .evaluate import benchmark_summary, run_benchmark, write_benchmark

    rows = run_benchmark(args.N, args.sigma, args.I, tuple(args.methods), args.reps, args.seed,
                         args.d_G, args.d_M, threads=args.threads)
    os.makedirs(args.out, exist_ok=True)
    write_benchmark(rows, os.path.join(args.out, "benchmark.tsv"), os.path.join(args.out, "benchmark.json"))
    for c in benchmark_summary(rows)["cells"]:
        print(f"N={c['N']} sigma={c['sigma']} I={c['I']} {c['method']}: "
              f"median recall {c['median_recall']}, median precision {c['median_precision']}")
    return 0


def _levels(d, step):
    step = step or max(1, d // 20)
    return list(range(0, d, step))


def cmd_explore(args):
    from .explore import ActiveSetStop, explore
    from .model import validate_pairing
    from .pipeline import PipelineConfig, _cluster, _load_view, _load_y, _preprocess

    cfg = PipelineConfig(clr=not args.no_clr)
    x_G, x_M, y = _load_view(args.x_G), _load_view(args.x_M), _load_y(args.y)
    validate_pairing(x_G, x_M, y)
    dg, sg, _ = _preprocess(x_G, y, False, cfg)
    dm, sm, _ = _preprocess(x_M, y, True, cfg)
    hG = _cluster(sg.data, cfg.cluster_G, cfg.metric_G)
    hM = _cluster(sm.data, cfg.cluster_M, cfg.metric_M)
    res = explore(hG, hM, dg, dm, y, args.criterion, args.rule, args.outer,
                  _levels(hG.leaf_count, args.level_step), _levels(hM.leaf_count, args.level_step),
                  ActiveSetStop(max_features=args.max_features))
    trace = res.trace_tsv()
    sys.stdout.write(trace)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "explore_trace.tsv"), "w", encoding="utf-8") as fh:
            fh.write(trace)
        best = res.best
        with open(os.path.join(args.out, "explore_best.json"), "w", encoding="utf-8") as fh:
            json.dump({"k": best.k, "l": best.l, "criterion": best.criterion_value, "mse": best.mse,
                       "pairs": best.pairs(), "theta": best.theta.tolist(),
                       "n_visited": res.n_visited, "outer": res.outer}, fh, indent=1)
    print(f"# best k={res.best.k} l={res.best.l} criterion={res.best.criterion_value:.6g} "
          f"visited={res.n_visited}", file=sys.stderr)
    return 0


def cmd_theorem(args):
    from .evaluate import TheoremCheckConfig, averaged_estimator_gain

    beta = tuple(args.beta) if args.beta else (0.0, 1.0)
    cfg = TheoremCheckConfig(len(beta), args.rho, beta, args.sigma, args.n_mc, args.n_samples, args.seed,
                             args.exact_gram)
    print(json.dumps(averaged_estimator_gain(cfg).to_dict(), indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sicomore", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="detect interactions between two views")
    _add_run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("simulate", help="write one synthetic scenario")
    p.add_argument("--n-samples", type=int, default=100)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--interactions", type=int, default=5)
    p.add_argument("--d-G", dest="d_G", type=int, default=200)
    p.add_argument("--d-M", dest="d_M", type=int, default=100)
    p.add_argument("--null", action="store_true", help="zero interaction effects")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="precision/recall over a simulation grid")
    p.add_argument("--N", type=int, nargs="+", default=[100])
    p.add_argument("--sigma", type=float, nargs="+", default=[0.5])
    p.add_argument("--I", type=int, nargs="+", default=[5])
    p.add_argument("--methods", nargs="+", choices=("sicomore", "hcar"), default=["sicomore", "hcar"])
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--d-G", dest="d_G", type=int, default=200)
    p.add_argument("--d-M", dest="d_M", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("explore", help="greedy search over tree level pairs")
    p.add_argument("--x-G", dest="x_G", required=True)
    p.add_argument("--x-M", dest="x_M", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--no-clr", action="store_true")
    p.add_argument("--criterion", choices=("aic", "bic"), default="bic")
    p.add_argument("--rule", choices=("criterion", "mse", "sparsest"), default="criterion")
    p.add_argument("--outer", choices=("deeper", "shallower", "G", "M"), default="deeper")
    p.add_argument("--level-step", type=int, default=None, help="visit every n-th level (default D // 20)")
    p.add_argument("--max-features", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("theorem-check", help="averaged versus least-squares estimator risk")
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--beta", type=float, nargs="+")
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--n-mc", type=int, default=5000)
    p.add_argument("--n-samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exact-gram", action="store_true")
    p.set_defaults(func=cmd_theorem)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SicomoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: {NumericalError(str(exc))}", file=sys.stderr)
        return NumericalError.exit_code


if __name__ == "__main__":
    sys.exit(main())
