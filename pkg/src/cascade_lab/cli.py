"""Command-line entry point: cascade-lab <subcommand>.

Wires the pipeline end to end: ingest -> simulate/table -> compound ->
ks/fit -> bucketize.  Every command is deterministic given its full flag
set (seed included, worker count excluded); file outputs are atomic.

Exit codes: 0 success, 1 domain error (e.g. divergence-only grid, empty
histogram), 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import compound, diffusion, fit, graphs, ingest, stats

log = logging.getLogger("cascade_lab")

_MODEL_FLAGS = {
    "cgm": "cgm",
    "alpha": "alpha",
    "alpha-k": "alpha_k",
    "multi-exact": "multi_exact",
    "compound": "compound",
}


def _default_workers() -> int:
    env = os.environ.get("CASCADE_LAB_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument(
        "--workers",
        type=int,
        default=_default_workers(),
        help="worker threads (default $CASCADE_LAB_WORKERS or 1); never affects results",
    )
    p.add_argument("-v", "--verbose", action="count", default=0)


def _check_alpha(parser: argparse.ArgumentParser, alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        parser.error(f"--alpha must be in [0, 1], got {alpha}")


def _check_lambda(parser: argparse.ArgumentParser, lam: float) -> None:
    if lam < 0.0:
        parser.error(f"--lambda must be >= 0, got {lam}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cascade-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="events TSV -> graph, popularity, day split")
    p.add_argument("--events", required=True)
    p.add_argument("--graph-out", required=True)
    p.add_argument("--popularity-out", required=True)
    p.add_argument("--split-out", required=True)
    p.add_argument("--id-map-out", help="default: <graph-out>.idmap.tsv")
    p.add_argument("--fresh-days", type=int, default=1,
                   help="initial days whose hashtags are excluded (default 1)")
    p.add_argument("--strict", action="store_true", help="fail on malformed lines")
    _common_flags(p)

    p = sub.add_parser("simulate", help="run a cascade model batch")
    p.add_argument("--graph", required=True)
    p.add_argument("--model", required=True,
                   choices=["cgm", "alpha", "alpha-k", "multi-exact"])
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--lambda", dest="lambda_", type=float, default=0.0)
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--hist-out", required=True)
    p.add_argument("--table-out")
    p.add_argument("--start", type=int, help="fixed start node (default: uniform per run)")
    p.add_argument("--size-cap", type=int)
    p.add_argument("--max-rounds", type=int, default=diffusion.DEFAULT_MAX_ROUNDS)
    _common_flags(p)

    p = sub.add_parser("table", help="build an alpha^k property table")
    p.add_argument("--graph", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--table-out", required=True)
    p.add_argument("--hist-out")
    p.add_argument("--size-cap", type=int)
    p.add_argument("--max-rounds", type=int, default=diffusion.DEFAULT_MAX_ROUNDS)
    _common_flags(p)

    p = sub.add_parser("compound", help="multi-source batch from a property table")
    p.add_argument("--table", required=True)
    p.add_argument("--lambda", dest="lambda_", type=float, required=True)
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--hist-out", required=True)
    p.add_argument("--round-cap", type=int, default=compound.DEFAULT_ROUND_CAP)
    _common_flags(p)

    p = sub.add_parser("ks", help="K-S statistic between two histogram TSVs")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    _common_flags(p)

    p = sub.add_parser("fit", help="grid search minimizing K-S against a target")
    p.add_argument("--graph", required=True)
    p.add_argument("--model", required=True,
                   choices=["cgm", "alpha", "alpha-k", "multi-exact", "compound"])
    p.add_argument("--target", required=True)
    p.add_argument("--alpha-lo", type=float, required=True)
    p.add_argument("--alpha-hi", type=float, required=True)
    p.add_argument("--lambda-lo", type=float)
    p.add_argument("--lambda-hi", type=float)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--runs-per-point", type=int, default=1_000_000)
    p.add_argument("--refine", type=int, default=0,
                   help="multi-resolution levels (0 = flat paper-style sweep)")
    p.add_argument("--report-out", required=True)
    p.add_argument("--size-cap", type=int)
    p.add_argument("--max-rounds", type=int, default=diffusion.DEFAULT_MAX_ROUNDS)
    _common_flags(p)

    p = sub.add_parser("bucketize", help="histogram -> logarithmic bucket masses")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--base", type=float, required=True)
    p.add_argument("--out", required=True)
    _common_flags(p)

    return parser


def cmd_ingest(args: argparse.Namespace) -> int:
    stats_ = ingest.ParseStats()
    events = ingest.load_events(args.events, strict=args.strict, stats=stats_)
    if not events:
        raise ValueError("no events parsed from input")
    edges, mapping = ingest.build_retweet_edges(events)
    graph = graphs.build(edges, "forward", num_nodes=len(mapping))
    graph.save(args.graph_out)
    id_map_path = args.id_map_out or f"{args.graph_out}.idmap.tsv"
    ingest.write_id_map(mapping, id_map_path)

    window = ingest.fresh_window(events, args.fresh_days)
    popularity = ingest.compute_popularity(events, window)
    ingest.write_popularity(popularity, args.popularity_out)

    split = ingest.split_days(events)
    ingest.write_day_split(split, args.split_out)

    print(
        f"events={stats_.records} malformed={stats_.malformed} "
        f"nodes={graph.num_nodes} edges={graph.num_edges} "
        f"fresh_hashtags={popularity.total_hashtags} "
        f"train_days={len(split.train)} test_days={len(split.test)}"
    )
    return 0


def cmd_simulate(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    _check_alpha(parser, args.alpha)
    _check_lambda(parser, args.lambda_)
    g = graphs.Graph.load(args.graph)
    params = diffusion.ModelParams(
        args.alpha, max_rounds=args.max_rounds, size_cap=args.size_cap
    )
    hist, table = diffusion.run_batch(
        g,
        _MODEL_FLAGS[args.model],
        params,
        args.runs,
        seed=args.seed,
        lambda_=args.lambda_,
        workers=args.workers,
        start=args.start,
    )
    stats.write_histogram(hist, args.hist_out)
    if args.table_out:
        table.save(args.table_out)
    print(f"runs={hist.runs} truncated={hist.truncated} distinct_sizes={len(hist.counts)}")
    return 0


def cmd_table(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    _check_alpha(parser, args.alpha)
    g = graphs.Graph.load(args.graph)
    params = diffusion.ModelParams(
        args.alpha, max_rounds=args.max_rounds, size_cap=args.size_cap
    )
    hist, table = diffusion.run_batch(
        g, "alpha_k", params, args.runs, seed=args.seed, workers=args.workers
    )
    table.save(args.table_out)
    if args.hist_out:
        stats.write_histogram(hist, args.hist_out)
    print(f"runs={hist.runs} entries={table.num_entries}")
    return 0


def cmd_compound(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    _check_lambda(parser, args.lambda_)
    table = compound.PropertyTable.load(args.table)
    hist = compound.run_compound_batch(
        table,
        args.lambda_,
        args.runs,
        seed=args.seed,
        workers=args.workers,
        round_cap=args.round_cap,
    )
    stats.write_histogram(hist, args.hist_out)
    print(f"runs={hist.runs} diverged={hist.diverged}")
    return 0


def cmd_ks(args: argparse.Namespace) -> int:
    a = stats.read_histogram(args.a)
    b = stats.read_histogram(args.b)
    result = stats.ks_statistic(stats.to_cdf(a), stats.to_cdf(b))
    print(f"{result.statistic:.6f}\t{result.location}")
    return 0


def cmd_fit(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if (args.lambda_lo is None) != (args.lambda_hi is None):
        parser.error("--lambda-lo and --lambda-hi must be given together")
    g = graphs.Graph.load(args.graph)
    target = stats.read_histogram(args.target)
    spec = fit.GridSpec(
        alpha_lo=args.alpha_lo,
        alpha_hi=args.alpha_hi,
        step=args.step,
        lambda_lo=args.lambda_lo,
        lambda_hi=args.lambda_hi,
        runs_per_point=args.runs_per_point,
        refinement_levels=args.refine,
    )
    result = fit.grid_search(
        g,
        _MODEL_FLAGS[args.model],
        target,
        spec,
        seed=args.seed,
        workers=args.workers,
        max_rounds=args.max_rounds,
        size_cap=args.size_cap,
    )
    fit.write_fit_report(result, args.report_out)
    print(fit.summary_line(result))
    return 0


def cmd_bucketize(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if args.base <= 1.0:
        parser.error(f"--base must be > 1, got {args.base}")
    hist = stats.read_histogram(args.input)
    buckets = stats.log_bucketize(hist, args.base)
    stats.write_buckets(buckets, args.out)
    print(f"buckets={len(buckets)}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING
    if args.verbose == 1:
        level = logging.INFO
    elif args.verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(message)s")

    try:
        if args.command == "ingest":
            return cmd_ingest(args)
        if args.command == "simulate":
            return cmd_simulate(args, parser)
        if args.command == "table":
            return cmd_table(args, parser)
        if args.command == "compound":
            return cmd_compound(args, parser)
        if args.command == "ks":
            return cmd_ks(args)
        if args.command == "fit":
            return cmd_fit(args, parser)
        if args.command == "bucketize":
            return cmd_bucketize(args, parser)
        parser.error(f"unknown command {args.command}")
    except (OSError, graphs.GraphFormatError, ingest.ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, compound.DivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
