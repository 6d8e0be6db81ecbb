"""Accuracy metrics, pooling and a multi-query experiment runner."""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .baselines import mc_single_source, parsim_single_source, power_method
from .core import QueryOptions, iterations_for, single_source
from .diag import ProfileCache
from .graph import Graph
from .walks import RandomSource

# computed ground truth carries float noise; values this close count as tied
TIE_TOL = 1e-12


def max_error(est, truth) -> float:
    est, truth = np.asarray(est, dtype=float), np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {truth.shape}")
    if est.size == 0:
        return 0.0
    return float(np.abs(est - truth).max())


@dataclass(frozen=True)
class Ranking:
    nodes: np.ndarray
    scores: np.ndarray
    short: bool = False  # fewer than k candidates were available

    def __len__(self):
        return len(self.nodes)


def top_k(scores, k, exclude_source=None) -> Ranking:
    """Best k nodes by descending score, ties broken by ascending node id."""
    if k < 1:
        raise ValueError("k must be at least 1")
    scores = np.asarray(scores, dtype=float)
    order = np.lexsort((np.arange(scores.size), -scores))
    if exclude_source is not None:
        order = order[order != exclude_source]
    take = order[:k]
    return Ranking(take, scores[take], short=take.size < k)


def _kth_true(truth, k, exclude_source):
    """k-th largest true score and the effective k (capped by available nodes)."""
    vals = np.asarray(truth, dtype=float)
    if exclude_source is not None:
        vals = np.delete(vals, exclude_source)
    vals = np.sort(vals)[::-1]
    k_eff = min(k, vals.size)
    return vals[k_eff - 1], k_eff


def precision_at_k(est_ranking: Ranking, truth, k, exclude_source=None, tie_tol=TIE_TOL) -> float:
    """Share of the returned top-k whose true score reaches the k-th largest true score.

    When fewer than k candidates exist the share is taken over those.
    """
    truth = np.asarray(truth, dtype=float)
    kth, k_eff = _kth_true(truth, k, exclude_source)
    nodes = np.asarray(est_ranking.nodes[:k])
    if exclude_source is not None:
        nodes = nodes[nodes != exclude_source]
    hits = int(np.count_nonzero(truth[nodes] >= kth - tie_tol))
    return hits / k_eff


def pool_evaluate(rankings: dict, k, verifier, tie_tol=TIE_TOL) -> dict:
    """Relative precision of several top-k answers against the best k of their union."""
    if len(rankings) < 2:
        raise ValueError("pooling needs at least two rankings")
    verifier = np.asarray(verifier, dtype=float)
    pool = np.unique(np.concatenate([np.asarray(r.nodes[:k]) for r in rankings.values()]))
    vals = np.sort(verifier[pool])[::-1]
    k_eff = min(k, vals.size)
    kth = vals[k_eff - 1]
    return {
        name: int(np.count_nonzero(verifier[np.asarray(r.nodes[:k])] >= kth - tie_tol)) / k_eff
        for name, r in rankings.items()
    }


@dataclass(frozen=True)
class Algorithm:
    name: str
    run: Callable[[int], np.ndarray]


def make_algorithm(descriptor: str, g: Graph, seed: int = 0, c: float = 0.6, threads: int = 1,
                   cache: ProfileCache | None = None) -> Algorithm:
    """Build an algorithm from ``name[:param]``.

    ``exactsim:EPS``, ``exactsim-basic:EPS``, ``exactsim-sq:EPS``,
    ``exactsim-dense:EPS``, ``mc:WALKS[:LEN]``, ``parsim[:L]``, ``power[:ITERS]``.
    """
    name, _, param = descriptor.partition(":")
    if name.startswith("exactsim"):
        eps = float(param or 1e-3)
        kw = dict(eps=eps, c=c, seed=seed, threads=threads)
        if name == "exactsim-basic":
            kw["diag_method"] = "basic"
        elif name == "exactsim-sq":
            kw["allocation"] = "squared_norm"
        elif name == "exactsim-dense":
            kw["sparse"] = False
        elif name != "exactsim":
            raise ValueError(f"unknown algorithm {descriptor!r}")
        opts = QueryOptions(**kw)
        cache = cache if cache is not None else ProfileCache(g, c)
        return Algorithm(descriptor, lambda i: single_source(g, i, opts, cache=cache).scores)
    if name == "mc":
        walks, _, length = param.partition(":")
        r = int(float(walks or 100))
        cap = int(length or 20)
        return Algorithm(descriptor, lambda i: mc_single_source(g, i, cap, r, RandomSource(seed), c))
    if name == "parsim":
        L = int(param or iterations_for(1e-7, c))
        return Algorithm(descriptor, lambda i: parsim_single_source(g, i, L, c))
    if name == "power":
        iters = int(param or 60)
        holder = {}

        def run(i):
            if "S" not in holder:
                holder["S"] = power_method(g, iters, c).S
            return holder["S"][i].copy()

        return Algorithm(descriptor, run)
    raise ValueError(f"unknown algorithm {descriptor!r}")


def power_truth(g: Graph, c: float = 0.6, L_p: int = 60):
    S = power_method(g, L_p, c).S
    return lambda i: S[i]


def run_experiment(g: Graph, algorithms: Sequence[Algorithm], num_queries: int, seed: int,
                   truth: Callable[[int], np.ndarray] | None = None, k: int = 50,
                   exclude_source: bool = True, c: float = 0.6) -> list[dict]:
    """Per-query MaxError / Precision@k rows followed by one ``avg`` row per algorithm."""
    if truth is None:
        truth = power_truth(g, c)
    rng = np.random.default_rng(seed)
    sources = rng.choice(g.n, size=num_queries, replace=num_queries > g.n)
    rows = []
    for qid, i in enumerate(sources):
        i = int(i)
        t_i = truth(i)
        excl = i if exclude_source else None
        for alg in algorithms:
            t0 = time.perf_counter()
            est = alg.run(i)
            wall = (time.perf_counter() - t0) * 1000.0
            rows.append({
                "query_id": qid,
                "source": i,
                "algorithm": alg.name,
                "max_error": max_error(est, t_i),
                "precision_at_k": precision_at_k(top_k(est, k, excl), t_i, k, excl),
                "wall_ms": wall,
            })
    for alg in algorithms:
        mine = [r for r in rows if r["algorithm"] == alg.name]
        rows.append({
            "query_id": "avg",
            "source": "",
            "algorithm": alg.name,
            "max_error": math.fsum(r["max_error"] for r in mine) / len(mine),
            "precision_at_k": math.fsum(r["precision_at_k"] for r in mine) / len(mine),
            "wall_ms": math.fsum(r["wall_ms"] for r in mine) / len(mine),
        })
    return rows


REPORT_FIELDS = ["query_id", "algorithm", "max_error", "precision_at_k", "wall_ms"]


def write_report(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_FIELDS)
        for r in rows:
            w.writerow([
                r["query_id"], r["algorithm"], f"{r['max_error']:.17g}",
                f"{r['precision_at_k']:.17g}", f"{r['wall_ms']:.3f}",
            ])
