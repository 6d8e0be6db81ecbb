"""l-hop Personalized PageRank vectors of a source and their sparsified storage."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph


@dataclass(frozen=True)
class SparseVector:
    index: np.ndarray  # strictly ascending node ids
    value: np.ndarray  # positive entries

    @classmethod
    def from_dense(cls, x, threshold=0.0):
        idx = np.flatnonzero(x > threshold)
        return cls(idx, x[idx].copy())

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0))

    def __len__(self):
        return len(self.index)

    def to_dense(self, n):
        out = np.zeros(n)
        out[self.index] = self.value
        return out

    def get(self, k):
        pos = np.searchsorted(self.index, k)
        if pos < len(self.index) and self.index[pos] == k:
            return float(self.value[pos])
        return 0.0

    def total(self):
        return float(self.value.sum())


@dataclass(frozen=True)
class HopTable:
    source: int
    L: int
    c: float
    hops: tuple[SparseVector, ...]
    aggregate: SparseVector
    sq_norm: float
    threshold: float

    @property
    def nnz(self) -> int:
        return sum(len(h) for h in self.hops)

    def total_mass(self) -> float:
        return sum(h.total() for h in self.hops)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("level,node,value\n")
            for lvl, h in enumerate(self.hops):
                for k, v in zip(h.index, h.value):
                    fh.write(f"{lvl},{k},{v:.17g}\n")


def compute_hop_table(g: Graph, i: int, L: int, c: float, threshold: float = 0.0) -> HopTable:
    """pi^0 = (1 - sqrt c) e_i, pi^l = sqrt(c) P pi^(l-1), l = 0..L.

    Every level is propagated from the exact dense previous level; only the
    stored copy drops entries <= ``threshold``, so the cutoff error does not
    compound across levels.
    """
    if not 0 < c < 1:
        raise ValueError(f"decay c must lie in (0, 1), got {c}")
    if not 0 <= i < g.n:
        raise ValueError(f"source {i} not in graph with n={g.n}")
    if L < 0:
        raise ValueError("L must be non-negative")
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    sqrt_c = math.sqrt(c)
    cur = np.zeros(g.n)
    cur[i] = 1.0 - sqrt_c
    hops = [SparseVector.from_dense(cur, threshold)]
    for _ in range(L):
        cur = sqrt_c * (g.transition @ cur)
        hops.append(SparseVector.from_dense(cur, threshold))
    # reuse `cur` as the aggregate accumulator; just two dense buffers overall
    cur[:] = 0.0
    for h in hops:
        cur[h.index] += h.value
    aggregate = SparseVector.from_dense(cur)
    return HopTable(
        source=i,
        L=L,
        c=c,
        hops=tuple(hops),
        aggregate=aggregate,
        sq_norm=float(np.dot(aggregate.value, aggregate.value)),
        threshold=threshold,
    )


def squared_norm(t: HopTable) -> float:
    return float(np.dot(t.aggregate.value, t.aggregate.value))
