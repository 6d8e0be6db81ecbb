"""Synthetic graphs for tests, acceptance runs and benchmarks."""
from __future__ import annotations

import numpy as np

from .graph import Graph


def erdos_renyi_digraph(n, mean_degree, seed) -> Graph:
    """G(n, p) digraph without self-loops, p = mean_degree / (n - 1)."""
    rng = np.random.default_rng(seed)
    mask = rng.random((n, n)) < mean_degree / (n - 1)
    np.fill_diagonal(mask, False)
    src, dst = np.nonzero(mask)
    return Graph.from_arcs(n, src, dst)


def erdos_renyi_undirected(n, mean_degree, seed) -> Graph:
    """G(n, p) undirected graph stored as opposing arcs."""
    rng = np.random.default_rng(seed)
    mask = np.triu(rng.random((n, n)) < mean_degree / (n - 1), k=1)
    src, dst = np.nonzero(mask)
    return Graph.from_arcs(n, np.concatenate([src, dst]), np.concatenate([dst, src]))


def random_small_digraph(n, seed, p=0.5, self_loops=True) -> Graph:
    rng = np.random.default_rng(seed)
    mask = rng.random((n, n)) < p
    if not self_loops:
        np.fill_diagonal(mask, False)
    src, dst = np.nonzero(mask)
    return Graph.from_arcs(n, src, dst)


def power_law_digraph(n, m, seed, exponent=2.1) -> Graph:
    """Chung-Lu style digraph: endpoints drawn with weights ~ rank^(-1/(exponent-1)).

    Sources and targets use independent random rankings.  Duplicate arcs and
    self-loops are removed, so the arc count lands a little below ``m``.
    """
    rng = np.random.default_rng(seed)
    w = np.arange(1, n + 1, dtype=np.float64) ** (-1.0 / (exponent - 1.0))
    w /= w.sum()
    src = rng.permutation(n)[rng.choice(n, size=m, p=w)]
    dst = rng.permutation(n)[rng.choice(n, size=m, p=w)]
    keep = src != dst
    return Graph.from_arcs(n, src[keep], dst[keep])


def directed_cycle(n) -> Graph:
    idx = np.arange(n)
    return Graph.from_arcs(n, idx, (idx + 1) % n)


def complete_digraph(n) -> Graph:
    src, dst = np.nonzero(~np.eye(n, dtype=bool))
    return Graph.from_arcs(n, src, dst)
