"""``exactsim`` command line: convert, query, groundtruth, eval, bench.

Exit codes: 0 success, 1 usage error, 2 refusal (node caps, sample budgets).
Node ids on the command line and in output files are the dense internal
ids; ``convert`` writes a ``.map.csv`` sidecar when input ids were remapped.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys


from . import baselines, evaluation
from .core import QueryOptions, SingleSourceResult, meta_path, read_scores_csv, single_source, write_scores_csv
from .diag import ProfileCache
from .errors import ExactSimError, GraphFormatError, RefusalError
from .graph import load_edge_list, load_graph, save_binary

log = logging.getLogger("exactsim")

EXIT_OK, EXIT_USAGE, EXIT_REFUSED = 0, 1, 2
LOW_EPS_WARNING = 1e-7


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageError("")


def _threads(flag):
    if flag is not None:
        return flag
    env = os.environ.get("EXACTSIM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"EXACTSIM_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="exactsim", description="Single-source SimRank with exact diagonal estimation.")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    cv = sub.add_parser("convert", help="edge list to XSGRAPH1 binary cache")
    cv.add_argument("input")
    cv.add_argument("output")
    cv.add_argument("--undirected", action="store_true")

    q = sub.add_parser("query", help="single-source SimRank scores")
    q.add_argument("--graph", required=True)
    q.add_argument("--source", type=int, required=True)
    q.add_argument("--eps", type=float, required=True)
    q.add_argument("--c", type=float, default=0.6)
    method = q.add_mutually_exclusive_group()
    method.add_argument("--basic", dest="diag_method", action="store_const", const="basic")
    method.add_argument("--opt", dest="diag_method", action="store_const", const="optimized")
    q.add_argument("--dense", action="store_true", help="skip hop-table sparsification")
    q.add_argument("--alloc", choices=["prop", "sq"], default="prop")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--threads", type=int)
    q.add_argument("--out")
    q.set_defaults(diag_method="optimized")

    gt = sub.add_parser("groundtruth", help="power-method ground truth")
    gt.add_argument("--graph", required=True)
    gt.add_argument("--method", choices=["power"], default="power")
    gt.add_argument("--out", required=True)
    gt.add_argument("--source", type=int, help="write one CSV row instead of the matrix")
    gt.add_argument("--iterations", type=int, default=60)
    gt.add_argument("--node-cap", type=int, default=baselines.DEFAULT_NODE_CAP)
    gt.add_argument("--c", type=float, default=0.6)

    ev = sub.add_parser("eval", help="compare a score file with ground truth")
    ev.add_argument("--est", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--k", type=int, default=500)
    ev.add_argument("--source", type=int, help="node excluded from top-k (default: from the est sidecar)")
    ev.add_argument("--include-source", action="store_true")

    b = sub.add_parser("bench", help="multi-query experiment report")
    b.add_argument("--graph", required=True)
    b.add_argument("--queries", type=int, required=True)
    b.add_argument("--algos", required=True, help="comma list, e.g. exactsim:1e-3,mc:1000,parsim")
    b.add_argument("--out", required=True)
    b.add_argument("--k", type=int, default=50)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--c", type=float, default=0.6)
    b.add_argument("--truth-eps", type=float, default=1e-7,
                   help="ExactSim truth precision when the power method is refused")
    b.add_argument("--node-cap", type=int, default=baselines.DEFAULT_NODE_CAP)
    b.add_argument("--threads", type=int)
    return p


def _cmd_convert(a):
    g = load_edge_list(a.input, undirected=a.undirected)
    save_binary(g, a.output)
    print(f"n={g.n} m={g.m}")


def _cmd_query(a):
    if a.eps <= 0:
        raise UsageError("--eps must be positive")
    if a.eps < LOW_EPS_WARNING:
        log.warning("eps=%g is below double-precision accumulation accuracy for large graphs", a.eps)
    g = load_graph(a.graph)
    if not 0 <= a.source < g.n:
        raise UsageError(f"--source {a.source} not in graph (n={g.n})")
    opts = QueryOptions(
        eps=a.eps, c=a.c, seed=a.seed, sparse=not a.dense, diag_method=a.diag_method,
        allocation="squared_norm" if a.alloc == "sq" else "proportional",
        threads=_threads(a.threads),
    )
    res: SingleSourceResult = single_source(g, a.source, opts)
    res.meta["graph"] = os.path.abspath(a.graph)
    if a.out:
        res.write(a.out)
    else:
        write_scores_csv(sys.stdout, res.scores)


def _cmd_groundtruth(a):
    g = load_graph(a.graph)
    sm = baselines.power_method(g, a.iterations, a.c, node_cap=a.node_cap)
    if a.source is not None:
        if not 0 <= a.source < g.n:
            raise UsageError(f"--source {a.source} not in graph (n={g.n})")
        write_scores_csv(a.out, sm.row(a.source))
    else:
        baselines.save_simmatrix(sm, a.out)


def _eval_source(a):
    if a.include_source:
        return None
    if a.source is not None:
        return a.source
    mp = meta_path(a.est)
    if os.path.exists(mp):
        with open(mp) as fh:
            return json.load(fh).get("source")
    return None


def _cmd_eval(a):
    if a.k < 1:
        raise UsageError("--k must be at least 1")
    est, truth = read_scores_csv(a.est), read_scores_csv(a.truth)
    if est.shape != truth.shape:
        raise UsageError(f"score files cover different node counts ({est.size} vs {truth.size})")
    src = _eval_source(a)
    prec = evaluation.precision_at_k(evaluation.top_k(est, a.k, src), truth, a.k, src)
    print(f"max_error={evaluation.max_error(est, truth):.6g} precision@{a.k}={prec:.6g}")


def _cmd_bench(a):
    g = load_graph(a.graph)
    threads = _threads(a.threads)
    cache = ProfileCache(g, a.c)
    try:
        algos = [evaluation.make_algorithm(s.strip(), g, a.seed, a.c, threads, cache)
                 for s in a.algos.split(",") if s.strip()]
    except ValueError as e:
        raise UsageError(str(e))
    if g.n <= a.node_cap:
        truth = evaluation.power_truth(g, a.c)
    else:
        log.info("n=%d over node cap; using ExactSim at eps=%g as truth", g.n, a.truth_eps)
        opts = QueryOptions(eps=a.truth_eps, c=a.c, seed=a.seed + 1, threads=threads)
        truth = lambda i: single_source(g, i, opts, cache=cache).scores  # noqa: E731
    rows = evaluation.run_experiment(g, algos, a.queries, a.seed, truth=truth, k=a.k, c=a.c)
    evaluation.write_report(rows, a.out)


COMMANDS = {
    "convert": _cmd_convert,
    "query": _cmd_query,
    "groundtruth": _cmd_groundtruth,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(levelname)s: %(message)s")
    try:
        a = build_parser().parse_args(argv)
        COMMANDS[a.cmd](a)
    except UsageError as e:
        if str(e):
            print(f"exactsim: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except RefusalError as e:
        print(f"exactsim: refused: {e}", file=sys.stderr)
        return EXIT_REFUSED
    except (GraphFormatError, FileNotFoundError, ValueError) as e:
        print(f"exactsim: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ExactSimError as e:
        print(f"exactsim: error: {e}", file=sys.stderr)
        return EXIT_REFUSED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
