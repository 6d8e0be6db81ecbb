"""Estimation of the diagonal correction D(k,k) = P[two sqrt(c)-walks from k never meet].

Two estimators are provided.  ``estimate_basic`` counts non-meeting pairs.
``estimate_optimized`` computes the first-meeting probabilities
``Z_l(k) = sum_q Z_l(k, q)`` exactly for the first ``l(k)`` levels and
samples only the tail beyond ``l(k)``.  The recursion is

    Z_l(k, q) = c^l (P^T)^l(k, q)^2
                - sum_{l'=1}^{l-1} sum_{q'} c^{l'} (P^T)^{l'}(q', q)^2 Z_{l-l'}(k, q')

and ``l(k)`` is fixed adaptively by an arc-traversal budget.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

import time

from .errors import BudgetExceededError, QueryTimeoutError
from .graph import Graph
from .ppr import SparseVector
from .walks import RandomSource, TrialKind, nonstop_prefixes, pair_meetings

DEFAULT_SAMPLE_CAP = 2**62
# default ceiling on per-node exploration traversals; bounds memory, not accuracy
DEFAULT_EXPLORE_CAP = 2**24
_NEG_TOL = 1e-12


class AllocationStrategy(str, enum.Enum):
    PROPORTIONAL = "proportional"
    SQUARED_NORM = "squared_norm"


class DiagMethod(str, enum.Enum):
    BASIC = "basic"
    OPTIMIZED = "optimized"


def _ceil(x):
    # absorbs float noise on values that are integral in exact arithmetic
    x = np.asarray(x, dtype=np.float64)
    return np.ceil(x * (1.0 - 1e-12))


def total_sample_count(n: int, eps: float, c: float, cap: int = DEFAULT_SAMPLE_CAP) -> int:
    """R = ceil(6 ln n / ((1 - sqrt c)^4 eps^2))."""
    if n < 2:
        raise ValueError("total_sample_count needs n >= 2")
    if eps <= 0 or not 0 < c < 1:
        raise ValueError("need eps > 0 and 0 < c < 1")
    raw = 6.0 * math.log(n) / ((1.0 - math.sqrt(c)) ** 4 * eps**2)
    if not raw < cap:
        raise BudgetExceededError(
            f"{raw:.3e} pair samples exceed the cap of {cap:.3e}; use a larger eps"
        )
    return int(_ceil(raw))


@dataclass(frozen=True)
class Allocation:
    nodes: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def dense(self, n):
        out = np.zeros(n, dtype=np.int64)
        out[self.nodes] = self.counts
        return out


def allocate_samples(agg: SparseVector, R: int, strategy=AllocationStrategy.PROPORTIONAL, sq_norm=None) -> Allocation:
    """Per-node pair-sample counts.

    Proportional gives ``ceil(R pi(k))``.  SquaredNorm shrinks the total to
    ``R' = ceil(||pi||^2 R)`` and gives ``ceil(R' pi(k)^2 / ||pi||^2)``.
    """
    strategy = AllocationStrategy(strategy)
    if len(agg) == 0 or agg.total() <= 0:
        raise ValueError("cannot allocate samples over an empty aggregate vector")
    if R < 1:
        raise ValueError("R must be at least 1")
    if strategy is AllocationStrategy.PROPORTIONAL:
        counts = _ceil(R * agg.value)
    else:
        if sq_norm is None:
            sq_norm = float(np.dot(agg.value, agg.value))
        if sq_norm <= 0:
            raise ValueError("squared norm must be positive")
        r_eff = _ceil(sq_norm * R)
        counts = _ceil(r_eff * agg.value**2 / sq_norm)
    counts = np.maximum(counts, 1).astype(np.int64)
    return Allocation(agg.index.copy(), counts)


def check_deadline(deadline):
    if deadline is not None and time.monotonic() > deadline:
        raise QueryTimeoutError("query exceeded its time limit")


def _count_meets(g, k, trials, prefix_len, rs, c, deadline=None):
    meets = 0
    for gen, size in rs.trial_blocks("diag", k, trials):
        check_deadline(deadline)
        kind, xs, ys = nonstop_prefixes(g, k, prefix_len, size, gen)
        surv = kind == TrialKind.SURVIVED
        meets += int(pair_meetings(g, xs[surv], ys[surv], gen, c).sum())
    return meets


def estimate_basic(g: Graph, k: int, R_k: int, rs: RandomSource, c: float, deadline=None) -> float:
    """Fraction of R_k sqrt(c)-walk pairs from k that never meet."""
    if R_k < 1:
        raise ValueError("R_k must be at least 1")
    meets = _count_meets(g, k, R_k, 0, rs, c, deadline)
    return 1.0 - meets / R_k


@dataclass
class ZTable:
    levels: list[SparseVector] = field(default_factory=list)  # levels[l-1] is Z_l(k, .)
    level_totals: list[float] = field(default_factory=list)

    @property
    def total(self) -> float:
        return math.fsum(self.level_totals)


class LocalExploration:
    """Level-by-level computation of reverse-transition rows and Z_l(k, .).

    Nodes are grouped by the first depth ``d`` at which a reverse walk from
    ``k`` can reach them.  For a group at depth ``d`` the rows
    ``(P^T)^t(q', .)`` are kept for ``t = 1..level + 1 - d``, stored squared
    and scaled by ``c^t`` since that is all the recursion consumes.  Each
    ``(q', t)`` row is computed exactly once.
    """

    def __init__(self, g: Graph, k: int, c: float):
        self.g = g
        self.k = k
        self.c = c
        self.level = 0
        self.traversals = 0
        self.exhausted = False
        self.group_of = np.full(g.n, -1, dtype=np.int64)
        self.pos_in_group = np.zeros(g.n, dtype=np.int64)
        self.group_of[k] = 0
        self.group_nodes = [np.array([k], dtype=np.int64)]
        self.group_last = [None]   # latest block (P^T)^t of the group's rows, t >= 1
        self.group_weights = [[]]  # group_weights[d][t-1] = c^t * ((P^T)^t)^2 rows
        self.z = []                # z[l-1] = Z_l(k, .) as a 1 x n CSR row
        self.z_totals = []

    def _row_support(self, d):
        last = self.group_last[d]
        if last is None:
            return self.group_nodes[d]
        return last.indices

    def next_cost(self) -> int:
        """Arc traversals needed to extend every group by one row length."""
        deg = self.g.in_deg
        return int(sum(deg[self._row_support(d)].sum() for d in range(len(self.group_nodes))))

    def stored_entries(self) -> int:
        return sum(w.nnz for ws in self.group_weights for w in ws)

    def _add_group(self, nodes):
        d = len(self.group_nodes)
        self.group_of[nodes] = d
        self.pos_in_group[nodes] = np.arange(nodes.size)
        self.group_nodes.append(nodes)
        self.group_last.append(None)
        self.group_weights.append([])

    def advance(self):
        """Extend all rows by one step and compute Z for the next level."""
        g, c = self.g, self.c
        pt = g.reverse_transition
        self.traversals += self.next_cost()
        t_new = self.level + 1
        for d in range(len(self.group_nodes)):
            last = self.group_last[d]
            nxt = pt[self.group_nodes[d]] if last is None else last @ pt
            nxt = nxt.tocsr()
            nxt.eliminate_zeros()
            nxt.sort_indices()
            self.group_last[d] = nxt
            w = nxt.copy()
            w.data = w.data**2 * c ** (t_new - d)
            self.group_weights[d].append(w)
        head = self.group_last[0]  # the single row (P^T)^{t_new}(k, .)
        fresh = head.indices[self.group_of[head.indices] < 0]
        if fresh.size:
            self._add_group(np.sort(fresh))
        self.level = t_new

        zl = self.group_weights[0][t_new - 1]
        for lp in range(1, t_new):
            prev = self.z[t_new - lp - 1]  # Z_{t_new - lp}(k, .)
            if prev.nnz == 0:
                continue
            groups = self.group_of[prev.indices]
            for d in np.unique(groups):
                if lp > len(self.group_weights[d]):
                    continue
                sel = groups == d
                rows = self.pos_in_group[prev.indices[sel]]
                zl = zl - sp.csr_matrix(prev.data[sel]) @ self.group_weights[d][lp - 1][rows]
        zl = sp.csr_matrix(zl)
        zl.sum_duplicates()
        low = zl.data.min() if zl.nnz else 0.0
        assert low >= -_NEG_TOL, f"Z underflow {low} at level {t_new}"
        zl.data[zl.data < 0] = 0.0
        zl.eliminate_zeros()
        self.z.append(zl)
        self.z_totals.append(math.fsum(zl.data))
        if head.nnz == 0:
            self.exhausted = True

    def ztable(self, upto=None) -> ZTable:
        upto = self.level if upto is None else upto
        levels = [SparseVector(z.indices.astype(np.int64), z.data.copy()) for z in self.z[:upto]]
        return ZTable(levels, list(self.z_totals[:upto]))


@dataclass
class ExplorationProfile:
    """Per-level costs and Z totals of one node's exploration, without the rows."""

    costs: list[int]       # costs[l] = traversals to go from level l to l + 1
    z_totals: list[float]  # z_totals[l-1] = Z_l(k)
    exhausted: bool
    stopped_by: str        # "budget", "max_level" or "exhausted"

    def choose_level(self, budget, max_level):
        """Return l(k) for the given budget, or None if the profile is too short."""
        spent = 0
        lvl = 0
        while True:
            if lvl == max_level:
                return lvl
            if lvl >= len(self.costs):
                return None
            if spent + self.costs[lvl] >= budget:
                return lvl
            spent += self.costs[lvl]
            if lvl + 1 > len(self.z_totals):
                return None
            lvl += 1
            if self.exhausted and lvl == len(self.z_totals):
                return lvl


def explore(g: Graph, k: int, c: float, edge_budget: int, max_level: int):
    """Run a LocalExploration until the budget, level cap or graph runs out."""
    ex = LocalExploration(g, k, c)
    stopped_by = "max_level"
    costs = []
    while ex.level < max_level:
        cost = ex.next_cost()
        costs.append(cost)
        if ex.traversals + cost >= edge_budget:
            stopped_by = "budget"
            break
        ex.advance()
        if ex.exhausted:
            stopped_by = "exhausted"
            break
    if stopped_by == "max_level":
        costs.append(ex.next_cost())
    return ex, ExplorationProfile(costs, list(ex.z_totals), ex.exhausted, stopped_by)


def local_Z_tables(g: Graph, k: int, edge_budget: int, c: float, max_level: int = 64):
    """Exact first-meeting tables for node ``k`` under an arc-traversal budget.

    Returns ``(l(k), ZTable)`` with Z complete through level ``l(k)``.  A
    level whose row extension would push the traversal count to the budget
    is discarded.
    """
    if edge_budget <= 0:
        return 0, ZTable()
    ex, _ = explore(g, k, c, edge_budget, max_level)
    return ex.level, ex.ztable()


def dense_profiles(g: Graph, c: float, max_level: int) -> dict[int, ExplorationProfile]:
    """Exploration profiles of every node at once, with dense n x n algebra.

    Row ``k`` of ``Z[l]`` is Z_l(k, .), so the recursion becomes
    ``Z_l = c^l (M^l)^2 - sum_{l'} Z_{l-l'} @ (c^{l'} (M^{l'})^2)`` with
    ``M = P^T``.  Traversal costs are derived from the sparsity patterns of
    the powers of ``M`` and equal the per-node exploration's counts.
    Intended for small graphs only.
    """
    n = g.n
    deg = g.in_deg.astype(np.float64)
    pt = g.reverse_transition.toarray()
    power = np.eye(n)
    depth = np.where(np.eye(n, dtype=bool), 0, -1)
    pattern_cost = [deg.copy()]  # pattern_cost[t][q'] = sum of d_in over supp (P^T)^t(q', .)
    weights, z_levels, z_rows = [], [], []
    alive = [np.ones(n, dtype=bool)]  # alive[t][k]: (P^T)^t(k, .) has support
    for t in range(1, max_level + 1):
        power = power @ pt
        support = power > 0
        depth[(depth < 0) & support] = t
        pattern_cost.append(support.astype(np.float64) @ deg)
        alive.append(support.any(axis=1))
        w = c**t * power**2
        weights.append(w)
        z = w.copy()
        for lp in range(1, t):
            z -= z_levels[t - lp - 1] @ weights[lp - 1]
        low = z.min()
        assert low >= -_NEG_TOL, f"Z underflow {low} at level {t}"
        np.maximum(z, 0.0, out=z)
        z_levels.append(z)
        z_rows.append([math.fsum(row[row > 0]) for row in z])
    max_depth = int(depth.max())
    masks = [(depth == d).astype(np.float64) for d in range(max_depth + 1)]
    costs_all = np.zeros((n, max_level + 1), dtype=np.int64)
    for lvl in range(max_level + 1):
        acc = np.zeros(n)
        for d in range(min(lvl, max_depth) + 1):
            acc += masks[d] @ pattern_cost[lvl - d]
        costs_all[:, lvl] = np.rint(acc).astype(np.int64)
    out = {}
    for k in range(n):
        dead = [t for t in range(1, max_level + 1) if not alive[t][k]]
        if dead:
            top = dead[0]
            out[k] = ExplorationProfile(
                costs_all[k, :top].tolist(), [z_rows[t - 1][k] for t in range(1, top + 1)],
                True, "exhausted",
            )
        else:
            out[k] = ExplorationProfile(
                costs_all[k].tolist(), [z_rows[t - 1][k] for t in range(1, max_level + 1)],
                False, "max_level",
            )
    return out


def _det_part(z_totals, level):
    return 1.0 - math.fsum(z_totals[:level])


class ProfileCache:
    """Memoizes exploration profiles per node for one (graph, c).

    Profiles do not depend on the query source, so repeated queries on the
    same graph reuse them.  Graphs with at most ``dense_limit`` nodes get
    all profiles in one batched dense pass.  A race between threads only
    duplicates deterministic work.
    """

    def __init__(self, g: Graph, c: float, dense_limit: int = 256):
        self.g = g
        self.c = c
        self.dense_limit = dense_limit
        self._profiles: dict[int, ExplorationProfile] = {}
        self._dense_level = -1

    def _refresh_dense(self, max_level):
        if max_level > self._dense_level:
            self._profiles = dense_profiles(self.g, self.c, max_level)
            self._dense_level = max_level

    def lookup(self, k, budget, max_level):
        use_dense = self.g.n <= self.dense_limit
        if use_dense:
            self._refresh_dense(max_level)
        prof = self._profiles.get(k)
        lvl = prof.choose_level(budget, max_level) if prof is not None else None
        if lvl is None:
            if use_dense:
                self._refresh_dense(max_level + 1)
                prof = self._profiles[k]
            else:
                _, prof = explore(self.g, k, self.c, budget, max_level)
                old = self._profiles.get(k)
                if old is None or len(prof.costs) > len(old.costs):
                    self._profiles[k] = prof
            lvl = prof.choose_level(budget, max_level)
        exhausted = prof.exhausted and lvl == len(prof.z_totals)
        return lvl, _det_part(prof.z_totals, lvl), exhausted


def estimate_optimized(
    g: Graph,
    k: int,
    R_k: int,
    rs: RandomSource,
    c: float,
    *,
    max_level: int = 64,
    edge_budget: int | None = None,
    scale_residual: bool = True,
    cache: ProfileCache | None = None,
    explore_cap: int | None = DEFAULT_EXPLORE_CAP,
    deadline: float | None = None,
):
    """D(k,k) from exact first-meeting levels plus a sampled tail.

    Returns ``(estimate, l(k), trials)``.  The tail beyond ``l(k)`` is
    estimated from pairs of walks that move without stopping for ``l(k)``
    steps and continue as sqrt(c)-walks; every meeting removes
    ``c^l(k) / trials``.  With ``scale_residual`` only ``ceil(R_k c^l(k))``
    tail pairs are drawn, which keeps each pair's weight at ``1 / R_k`` and
    the variance below that of ``R_k`` basic pairs.

    The default budget ``ceil(2 R_k / sqrt c)`` is clipped to ``explore_cap``
    traversals; an explicit ``edge_budget`` is used as given.
    """
    if R_k < 1:
        raise ValueError("R_k must be at least 1")
    d = int(g.in_deg[k])
    if d == 0:
        return 1.0, 0, 0
    if d == 1:
        return 1.0 - c, 0, 0
    if edge_budget is None:
        edge_budget = int(_ceil(2.0 * R_k / math.sqrt(c)))
        if explore_cap is not None:
            edge_budget = min(edge_budget, explore_cap)
    if edge_budget <= 0:
        lvl, det, exhausted = 0, 1.0, False
    elif cache is not None:
        lvl, det, exhausted = cache.lookup(k, edge_budget, max_level)
    else:
        ex, prof = explore(g, k, c, edge_budget, max_level)
        lvl = ex.level
        det = _det_part(prof.z_totals, lvl)
        exhausted = ex.exhausted
    if exhausted:
        # every walk pair has stopped or met by level l(k): the tail is exactly 0
        return min(max(det, 0.0), 1.0), lvl, 0
    weight = c**lvl
    trials = int(_ceil(R_k * weight)) if scale_residual else R_k
    trials = max(trials, 1)
    meets = _count_meets(g, k, trials, lvl, rs, c, deadline)
    est = det - weight * meets / trials
    return min(max(est, 0.0), 1.0), lvl, trials


@dataclass
class DiagEstimate:
    values: np.ndarray
    samples: np.ndarray
    det_level: np.ndarray
    trials: np.ndarray
    method: DiagMethod

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("node,value,samples,det_level\n")
            for k in np.flatnonzero(self.samples):
                fh.write(f"{k},{self.values[k]:.17g},{self.samples[k]},{self.det_level[k]}\n")

    @classmethod
    def from_csv(cls, path, n, c, method=DiagMethod.OPTIMIZED):
        values = np.full(n, 1.0 - c)
        samples = np.zeros(n, dtype=np.int64)
        level = np.zeros(n, dtype=np.int64)
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if rows.size:
            idx = rows[:, 0].astype(np.int64)
            values[idx] = rows[:, 1]
            samples[idx] = rows[:, 2].astype(np.int64)
            level[idx] = rows[:, 3].astype(np.int64)
        return cls(values, samples, level, samples.copy(), DiagMethod(method))


def estimate_all(
    g: Graph,
    alloc: Allocation,
    method,
    rs: RandomSource,
    c: float,
    *,
    max_level: int = 64,
    scale_residual: bool = True,
    edge_budget: int | None = None,
    cache: ProfileCache | None = None,
    threads: int = 1,
    explore_cap: int | None = DEFAULT_EXPLORE_CAP,
    deadline: float | None = None,
) -> DiagEstimate:
    """Estimate D(k,k) for every allocated node; others get the placeholder 1 - c."""
    method = DiagMethod(method)
    n = g.n
    values = np.full(n, 1.0 - c)
    samples = alloc.dense(n)
    level = np.zeros(n, dtype=np.int64)
    trials = np.zeros(n, dtype=np.int64)
    # heavy nodes first so workers finish together
    order = np.argsort(-alloc.counts, kind="stable")

    def job(pos):
        k, r = int(alloc.nodes[pos]), int(alloc.counts[pos])
        check_deadline(deadline)
        if method is DiagMethod.BASIC:
            return k, estimate_basic(g, k, r, rs, c, deadline), 0, r
        return (k, *estimate_optimized(
            g, k, r, rs, c, max_level=max_level, edge_budget=edge_budget,
            scale_residual=scale_residual, cache=cache, explore_cap=explore_cap,
            deadline=deadline,
        ))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, order))
    else:
        results = [job(p) for p in order]
    for k, v, lvl, t in results:
        values[k] = v
        level[k] = lvl
        trials[k] = t
    return DiagEstimate(values, samples, level, trials, method)
