"""Acceptance criteria, one test each; a summary line per criterion is printed at the end."""
import functools
import json
import math
import time
import tracemalloc

import numpy as np

from exactsim.baselines import enumerate_first_meetings, pair_chain_diag_oracle, parsim_single_source, power_method
from exactsim.cli import main as cli_main
from exactsim.core import QueryOptions, single_source
from exactsim.diag import ProfileCache, estimate_basic, estimate_optimized, local_Z_tables
from exactsim.errors import QueryTimeoutError
from exactsim.evaluation import max_error, precision_at_k, top_k
from exactsim.generators import (
    complete_digraph, directed_cycle, erdos_renyi_digraph, erdos_renyi_undirected,
    power_law_digraph, random_small_digraph,
)
from exactsim.graph import Graph, save_edge_list
from exactsim.walks import RandomSource

from conftest import ACCEPTANCE, C

SQ = math.sqrt(C)
N_SUITE, SOURCES = 200, 20


def record(num, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {detail}"
    ACCEPTANCE[num] = line
    print(line)
    assert ok, line


# ---- shared suite: 10 directed + 10 undirected ER graphs, n=200, mean degree 5


@functools.lru_cache(maxsize=None)
def suite_graph(gid):
    if gid < 10:
        return erdos_renyi_digraph(N_SUITE, 5, seed=gid)
    return erdos_renyi_undirected(N_SUITE, 5, seed=gid)


@functools.lru_cache(maxsize=None)
def suite_truth(gid):
    return power_method(suite_graph(gid), 60, C).S


@functools.lru_cache(maxsize=None)
def suite_cache(gid):
    return ProfileCache(suite_graph(gid), C)


@functools.lru_cache(maxsize=None)
def suite_sources(gid):
    return tuple(int(s) for s in np.random.default_rng(1000 + gid).choice(N_SUITE, SOURCES, replace=False))


@functools.lru_cache(maxsize=None)
def suite_query(gid, src, eps, sparse=True, allocation="proportional"):
    opts = QueryOptions(eps=eps, c=C, sparse=sparse, allocation=allocation, seed=7919 * gid + src)
    return single_source(suite_graph(gid), src, opts, cache=suite_cache(gid))


def suite_cases():
    for gid in range(20):
        for src in suite_sources(gid):
            yield gid, src


def test_criterion_01_ground_truth_agreement():
    t0 = time.perf_counter()
    errs = [max_error(suite_query(g, s, 1e-3).scores, suite_truth(g)[s]) for g, s in suite_cases()]
    errs = np.array(errs)
    fails = int(np.count_nonzero(errs > 1e-3))
    elapsed = time.perf_counter() - t0
    record(1, fails <= 1 and elapsed < 300,
           f"{errs.size} queries, {fails} over eps=1e-3 (allowed 1), worst {errs.max():.2e}, "
           f"{elapsed:.0f}s (limit 300s)")


def test_criterion_02_high_precision_convergence():
    t0 = time.perf_counter()
    gid = 0
    truth = suite_truth(gid)
    bad_prec, bad_set = [], []
    for s in suite_sources(gid):
        fine = suite_query(gid, s, 1e-5).scores
        coarse = suite_query(gid, s, 1e-4).scores
        top_fine = top_k(fine, 50, s)
        if precision_at_k(top_fine, truth[s], 50, s) != 1.0:
            bad_prec.append(s)
        if set(top_fine.nodes.tolist()) != set(top_k(coarse, 50, s).nodes.tolist()):
            bad_set.append(s)
    elapsed = time.perf_counter() - t0
    record(2, not bad_prec and not bad_set and elapsed < 600,
           f"precision@50<1 on sources {bad_prec}, top-50 mismatch eps 1e-5 vs 1e-4 on {bad_set}, "
           f"{elapsed:.0f}s (limit 600s)")


def _diag_fixtures():
    out = [(directed_cycle(2), 0, "2-cycle"), (complete_digraph(3), 0, "K3")]
    for seed in range(10):
        n = 10 + 4 * seed
        g = random_small_digraph(n, 500 + seed, p=3.0 / n)
        ks = np.flatnonzero(g.in_deg >= 2)
        for k in ks[:: max(1, ks.size // 2)][:2]:
            out.append((g, int(k), f"rand{seed}:{k}"))
    return out


def test_criterion_03_diagonal_oracle_agreement():
    t0 = time.perf_counter()
    r_k = 100_000
    budget = math.ceil(2 * r_k / SQ)
    worst, n_checks, bad = 0.0, 0, []
    for g, k, name in _diag_fixtures():
        cache = ProfileCache(g, C)
        truth = pair_chain_diag_oracle(g, k, C)
        b = estimate_basic(g, k, r_k, RandomSource(11), C)
        se_b = math.sqrt(truth * (1 - truth) / r_k)
        o, lvl, trials = estimate_optimized(g, k, r_k, RandomSource(11), C, cache=cache)
        # standard error of the sampled tail behind level l(k)
        _, det, _ = cache.lookup(k, budget, 64)
        w = C**lvl
        p_tail = min(max((det - truth) / w, 0.0), 1.0)
        se_o = w * math.sqrt(p_tail * (1 - p_tail) / trials) if trials else 0.0
        for est, se in ((b, se_b), (o, se_o)):
            dev = abs(est - truth)
            worst = max(worst, dev / max(se, 1e-12))
            n_checks += 1
            if dev > 4 * se + 1e-12:
                bad.append(name)
    elapsed = time.perf_counter() - t0
    record(3, not bad and elapsed < 120,
           f"{n_checks} estimates, worst deviation {worst:.2f} SE, outside 4 SE: {bad}, {elapsed:.0f}s (limit 120s)")


def test_criterion_04_z_recursion_bruteforce():
    worst, checks = 0.0, 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 6))
        mask = rng.random((n, n)) < rng.uniform(0.2, 0.9)
        src, dst = np.nonzero(mask)
        g = Graph.from_arcs(n, src, dst)
        for k in range(n):
            lvl, z = local_Z_tables(g, k, 10**12, C, max_level=4)
            brute = enumerate_first_meetings(g, k, C, 4)
            for l in range(4):
                for q in range(n):
                    mine = z.levels[l].get(q) if l < lvl else 0.0
                    worst = max(worst, abs(mine - brute[l].get(q, 0.0)))
                    checks += 1
    record(4, worst <= 1e-12, f"{checks} Z entries, max deviation {worst:.1e}")


def test_criterion_05_degenerate_reduction_identity():
    fixtures, seed = [], 0
    while len(fixtures) < 100:
        g = random_small_digraph(int(3 + seed % 8), 900 + seed, p=0.5)
        for k in np.flatnonzero(g.in_deg >= 2)[:2]:
            fixtures.append((g, int(k), seed))
        seed += 1
    mismatches = 0
    for g, k, s in fixtures[:100]:
        a = estimate_optimized(g, k, 5000, RandomSource(s), C, edge_budget=0)[0]
        b = estimate_basic(g, k, 5000, RandomSource(s), C)
        mismatches += a != b
    record(5, mismatches == 0, f"100 fixtures, {mismatches} not bit-identical")


def test_criterion_06_sparse_linearization_bound():
    bad_err, bad_nnz, n = [], [], 0
    for eps in (1e-2, 1e-3):
        bound = 1 / ((1 - SQ) ** 2 * (eps / 2))
        for g, s in suite_cases():
            truth = suite_truth(g)[s]
            sp_run = suite_query(g, s, eps, True)
            dn_run = suite_query(g, s, eps, False)
            n += 1
            if max_error(sp_run.scores, truth) > max_error(dn_run.scores, truth) + eps:
                bad_err.append((eps, g, s))
            if sp_run.meta["hop_nnz"] > bound:
                bad_nnz.append((eps, g, s))
    record(6, not bad_err and not bad_nnz,
           f"{n} sparse/dense pairs, error-bound violations {bad_err}, nnz-bound violations {bad_nnz}")


def test_criterion_07_allocation_strategies():
    fails, over = 0, []
    for g, s in suite_cases():
        run = suite_query(g, s, 1e-3, True, "squared_norm")
        if max_error(run.scores, suite_truth(g)[s]) > 1e-3:
            fails += 1
        m = run.meta
        if m["pair_samples"] > math.ceil(m["sq_norm"] * m["R_total"]) + N_SUITE:
            over.append((g, s))
    record(7, fails <= 1 and not over,
           f"SquaredNorm: {fails} queries over eps=1e-3 (allowed 1), sample-count violations {over}")


def test_criterion_08_first_meeting_matters():
    g = complete_digraph(3)
    truth = power_method(g, 60, C).S[0]
    par = max_error(parsim_single_source(g, 0, 60, C), truth)
    ex = max_error(single_source(g, 0, QueryOptions(eps=1e-3)).scores, truth)
    record(8, par > 0.05 and ex <= 1e-3, f"ParSim MaxError {par:.4f} (>0.05), ExactSim {ex:.2e} (<=1e-3)")


def test_criterion_09_power_method_contract():
    worst_ratio = 0.0
    for g in [complete_digraph(3), directed_cycle(5)] + [suite_graph(i) for i in (0, 10)]:
        for t, r in enumerate(power_method(g, 60, C).residuals):
            worst_ratio = max(worst_ratio, r / C**t)
    S = power_method(complete_digraph(3), 60, C).S
    k3_err = float(np.abs(S[~np.eye(3, dtype=bool)] - 3 / 11).max())
    record(9, worst_ratio <= 1 + 1e-9 and k3_err <= 1e-12,
           f"max residual/c^t {worst_ratio:.3f}, K3 off-diagonal error {k3_err:.1e}")


def _cli_outputs(d):
    run = [
        ["convert", str(d / "g.txt"), str(d / "g.bin")],
        ["query", "--graph", str(d / "g.bin"), "--source", "4", "--eps", "1e-2", "--seed", "3", "--out", str(d / "r.csv")],
        ["query", "--graph", str(d / "g.bin"), "--source", "4", "--eps", "0.1", "--basic", "--out", str(d / "rb.csv")],
        ["query", "--graph", str(d / "g.bin"), "--source", "9", "--eps", "1e-2", "--dense", "--alloc", "sq",
         "--threads", "2", "--out", str(d / "rd.csv")],
        ["groundtruth", "--graph", str(d / "g.bin"), "--method", "power", "--out", str(d / "t.csv"), "--source", "4"],
        ["groundtruth", "--graph", str(d / "g.bin"), "--method", "power", "--out", str(d / "S.bin")],
        ["bench", "--graph", str(d / "g.bin"), "--queries", "3", "--algos", "exactsim:1e-2,mc:100,parsim",
         "--k", "10", "--out", str(d / "rep.csv")],
    ]
    for argv in run:
        assert cli_main(argv) == 0, argv
    out = {}
    for f in sorted(d.iterdir()):
        if f.name == "g.txt":
            continue
        data = f.read_bytes()
        if f.name.endswith(".meta.json"):
            meta = json.loads(data)
            meta.pop("timings")
            meta.pop("graph")  # absolute input path differs between the two directories
            data = json.dumps(meta, sort_keys=True).encode()
        elif f.name == "rep.csv":
            data = b"\n".join(line.rsplit(b",", 1)[0] for line in data.splitlines())
        out[f.name] = data
    return out


def test_criterion_10_cli_determinism(tmp_path):
    runs = []
    for tag in ("a", "b"):
        d = tmp_path / tag
        d.mkdir()
        save_edge_list(erdos_renyi_digraph(60, 4, 21), d / "g.txt")
        runs.append(_cli_outputs(d))
    differ = sorted(k for k in runs[0] if runs[0][k] != runs[1].get(k))
    record(10, not differ and runs[0].keys() == runs[1].keys(),
           f"{len(runs[0])} output files compared, differing: {differ}")


def test_criterion_11_scale_smoke():
    g = power_law_digraph(100_000, 1_250_000, seed=11)
    src = int(np.argmax(g.in_deg))
    eps, limit = 1e-4, 600.0
    graph_bytes = sum(a.nbytes for a in (g.in_ptr, g.in_idx, g.out_ptr, g.out_idx))
    buffers = 2 * 8 * g.n
    tracemalloc.start()
    t0 = time.perf_counter()
    try:
        res = single_source(g, src, QueryOptions(eps=eps, time_limit=limit))
        done, meta = True, res.meta
    except QueryTimeoutError:
        done, meta = False, None
    elapsed = time.perf_counter() - t0
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    bound = 1 / ((1 - SQ) ** 2 * (eps / 2))
    nnz_ok = meta is not None and meta["hop_nnz"] <= bound
    mem_ok = peak <= 2 * (graph_bytes + buffers)
    record(11, done and nnz_ok and mem_ok,
           f"n={g.n} m={g.m} eps={eps}: {'completed' if done else 'did not complete'} in {elapsed:.0f}s "
           f"(limit {limit:.0f}s), hop nnz {meta['hop_nnz'] if meta else 'n/a'} (bound {bound:.0f}), "
           f"peak traced {peak / 2**20:.0f} MiB vs graph+buffers {(graph_bytes + buffers) / 2**20:.0f} MiB")
