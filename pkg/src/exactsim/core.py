"""Single-source SimRank: hop table, diagonal estimation, backward accumulation.

The score vector is

    s^L = 1/(1 - sqrt c) * sum_{l=0}^{L} (sqrt(c) P^T)^l  D_hat  pi_i^l

evaluated from the deepest level outwards with two dense buffers.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .diag import (
    AllocationStrategy,
    DiagEstimate,
    DiagMethod,
    DEFAULT_EXPLORE_CAP,
    DEFAULT_SAMPLE_CAP,
    ProfileCache,
    allocate_samples,
    estimate_all,
    total_sample_count,
)
from .graph import Graph
from .ppr import HopTable, compute_hop_table
from .walks import RandomSource


def iterations_for(eps: float, c: float) -> int:
    """L = ceil(log_{1/c}(2 / eps)), never negative."""
    if eps <= 0 or not 0 < c < 1:
        raise ValueError("need eps > 0 and 0 < c < 1")
    raw = math.log(2.0 / eps) / math.log(1.0 / c)
    return max(0, math.ceil(raw - 1e-12))


def backward_accumulate(g: Graph, diag, t: HopTable, c: float) -> np.ndarray:
    """Evaluate s^L from a hop table and diagonal estimates.

    ``diag`` is a DiagEstimate (coverage is checked) or a plain length-n
    array of D values.
    """
    if isinstance(diag, DiagEstimate):
        for lvl, h in enumerate(t.hops):
            missing = h.index[diag.samples[h.index] < 1]
            if missing.size:
                raise ValueError(f"no D estimate for nodes {missing[:5].tolist()} used at hop {lvl}")
        dvals = diag.values
    else:
        dvals = np.asarray(diag, dtype=np.float64)
        if dvals.shape != (g.n,):
            raise ValueError("diagonal must have one value per node")
    sqrt_c = math.sqrt(c)
    scale = 1.0 - sqrt_c
    pt = g.reverse_transition
    s = np.zeros(g.n)
    top = t.hops[t.L]
    s[top.index] = dvals[top.index] * top.value / scale
    for lvl in range(t.L - 1, -1, -1):
        s = sqrt_c * (pt @ s)
        h = t.hops[lvl]
        s[h.index] += dvals[h.index] * h.value / scale
    return s


@dataclass(frozen=True)
class QueryOptions:
    eps: float
    c: float = 0.6
    allocation: AllocationStrategy = AllocationStrategy.PROPORTIONAL
    diag_method: DiagMethod = DiagMethod.OPTIMIZED
    sparse: bool = True
    seed: int = 0
    L_override: int | None = None
    # exploration depth cap for the optimized estimator (None: twice L)
    max_level: int | None = None
    scale_residual: bool = True
    sample_cap: int = DEFAULT_SAMPLE_CAP
    explore_cap: int | None = DEFAULT_EXPLORE_CAP
    threads: int = 1
    # wall-clock seconds before the query gives up (None: no limit)
    time_limit: float | None = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not 0 < self.c < 1:
            raise ValueError(f"c must lie in (0, 1), got {self.c}")
        object.__setattr__(self, "allocation", AllocationStrategy(self.allocation))
        object.__setattr__(self, "diag_method", DiagMethod(self.diag_method))

    def to_dict(self):
        d = asdict(self)
        d["allocation"] = self.allocation.value
        d["diag_method"] = self.diag_method.value
        return d


@dataclass
class SingleSourceResult:
    source: int
    scores: np.ndarray
    meta: dict = field(default_factory=dict)

    def write(self, path):
        """Write ``node,score`` CSV plus ``<stem>.meta.json`` next to it."""
        write_scores_csv(path, self.scores)
        with open(meta_path(path), "w") as fh:
            json.dump(self.meta, fh, indent=2, sort_keys=True)
            fh.write("\n")


def meta_path(path):
    path = str(path)
    stem = path[:-4] if path.endswith(".csv") else path
    return stem + ".meta.json"


def write_scores_csv(dest, scores):
    """``node,score`` rows with round-trip precision; ``dest`` is a path or text stream."""
    body = "node,score\n" + "".join(f"{k},{v:.17g}\n" for k, v in enumerate(scores))
    if hasattr(dest, "write"):
        dest.write(body)
    else:
        with open(dest, "w") as fh:
            fh.write(body)


def read_scores_csv(path) -> np.ndarray:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    idx = rows[:, 0].astype(np.int64)
    out = np.zeros(int(idx.max()) + 1 if idx.size else 0)
    out[idx] = rows[:, 1]
    return out


def single_source(g: Graph, i: int, opts: QueryOptions, cache: ProfileCache | None = None) -> SingleSourceResult:
    """Scores S(i, .) within additive eps with probability >= 1 - 1/n.

    With ``opts.sparse`` the error budget is halved between sampling and
    hop-table sparsification.  ``cache`` carries exploration profiles between
    queries on the same graph (a fresh one is used when omitted); it never
    changes results.
    """
    if not 0 <= i < g.n:
        raise ValueError(f"source {i} not in graph with n={g.n}")
    c = opts.c
    timings = {}
    deadline = None if opts.time_limit is None else time.monotonic() + opts.time_limit
    t0 = time.perf_counter()
    eps_int = opts.eps / 2 if opts.sparse else opts.eps
    L = opts.L_override if opts.L_override is not None else iterations_for(eps_int, c)
    threshold = (1.0 - math.sqrt(c)) ** 2 * eps_int if opts.sparse else 0.0
    hop = compute_hop_table(g, i, L, c, threshold)
    timings["hop_table"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    R = total_sample_count(max(g.n, 2), eps_int, c, cap=opts.sample_cap)
    if len(hop.aggregate) == 0:
        raise ValueError("hop table retained no entries; eps too large for sparsification")
    alloc = allocate_samples(hop.aggregate, R, opts.allocation, hop.sq_norm)
    max_level = opts.max_level if opts.max_level is not None else 2 * L
    if cache is None:
        cache = ProfileCache(g, c)
    elif cache.g is not g or cache.c != c:
        raise ValueError("profile cache belongs to a different graph or decay")
    diag = estimate_all(
        g, alloc, opts.diag_method, RandomSource(opts.seed), c,
        max_level=max_level, scale_residual=opts.scale_residual,
        cache=cache, threads=opts.threads, explore_cap=opts.explore_cap,
        deadline=deadline,
    )
    timings["diag"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    scores = backward_accumulate(g, diag, hop, c)
    timings["backward"] = time.perf_counter() - t0

    used = alloc.nodes
    meta = {
        "source": int(i),
        "n": g.n,
        "m": g.m,
        "options": opts.to_dict(),
        "eps_internal": eps_int,
        "L": L,
        "R_total": R,
        "R_effective": int(math.ceil(hop.sq_norm * R)) if opts.allocation is AllocationStrategy.SQUARED_NORM else R,
        "sq_norm": hop.sq_norm,
        "threshold": threshold,
        "hop_nnz": hop.nnz,
        "hop_nnz_per_level": [len(h) for h in hop.hops],
        "max_level": max_level,
        "estimated_nodes": int(used.size),
        "pair_samples": alloc.total,
        "residual_trials": int(diag.trials[used].sum()),
        "det_level_max": int(diag.det_level[used].max()) if used.size else 0,
        "timings": timings,
    }
    return SingleSourceResult(i, scores, meta)


def strip_timings(meta: dict) -> dict:
    return {k: v for k, v in meta.items() if k != "timings"}
