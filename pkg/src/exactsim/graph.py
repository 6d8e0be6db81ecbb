"""Immutable directed graphs in CSR form and the reverse transition operators.

The (reverse) transition matrix is ``P(j, k) = 1 / d_in(k)`` for every
in-neighbor ``j`` of ``k``.  A reverse walk standing at ``k`` moves to a
uniform in-neighbor, so ``P^T`` row ``k`` is the one-step distribution of
such a walk.  Nodes with in-degree zero have an all-zero column.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import GraphFormatError

GRAPH_MAGIC = b"XSGRAPH1"


def _csr_from_pairs(n, rows, cols):
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(ptr, rows + 1, 1)
    return np.cumsum(ptr), cols.astype(np.int64)


@dataclass(frozen=True, eq=False)
class Graph:
    """Directed graph with in- and out-adjacency in CSR layout.

    ``in_idx[in_ptr[v]:in_ptr[v+1]]`` lists the in-neighbors of ``v`` in
    ascending order; ``out_*`` is the mirror image.  ``labels`` maps dense
    ids back to the ids found in the input file.
    """

    in_ptr: np.ndarray
    in_idx: np.ndarray
    out_ptr: np.ndarray
    out_idx: np.ndarray
    labels: np.ndarray

    @classmethod
    def from_arcs(cls, n, src, dst, labels=None):
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if src.shape != dst.shape:
            raise ValueError("src and dst must have equal length")
        if n < 0 or (src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n)):
            raise ValueError("arc endpoint outside 0..n-1")
        if src.size:
            key = np.unique(src * n + dst)
            src, dst = key // n, key % n
        in_ptr, in_idx = _csr_from_pairs(n, dst, src)
        out_ptr, out_idx = _csr_from_pairs(n, src, dst)
        if labels is None:
            labels = np.arange(n, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (n,):
            raise ValueError("labels must have one entry per node")
        for a in (in_ptr, in_idx, out_ptr, out_idx, labels):
            a.flags.writeable = False
        return cls(in_ptr, in_idx, out_ptr, out_idx, labels)

    @property
    def n(self) -> int:
        return len(self.in_ptr) - 1

    @property
    def m(self) -> int:
        return int(self.in_ptr[-1])

    @cached_property
    def in_deg(self) -> np.ndarray:
        d = np.diff(self.in_ptr)
        d.flags.writeable = False
        return d

    @cached_property
    def out_deg(self) -> np.ndarray:
        d = np.diff(self.out_ptr)
        d.flags.writeable = False
        return d

    def in_neighbors(self, v) -> np.ndarray:
        return self.in_idx[self.in_ptr[v]:self.in_ptr[v + 1]]

    def out_neighbors(self, u) -> np.ndarray:
        return self.out_idx[self.out_ptr[u]:self.out_ptr[u + 1]]

    @cached_property
    def inv_in_deg(self) -> np.ndarray:
        d = self.in_deg.astype(np.float64)
        inv = np.zeros_like(d)
        np.divide(1.0, d, out=inv, where=d > 0)
        return inv

    @cached_property
    def reverse_transition(self) -> sp.csr_matrix:
        """``P^T`` as CSR: row ``k`` holds ``1/d_in(k)`` on each in-neighbor."""
        data = np.repeat(self.inv_in_deg, self.in_deg)
        return sp.csr_matrix((data, self.in_idx, self.in_ptr), shape=(self.n, self.n))

    @cached_property
    def transition(self) -> sp.csr_matrix:
        return self.reverse_transition.T.tocsr()

    def has_identity_labels(self) -> bool:
        return bool(np.array_equal(self.labels, np.arange(self.n)))

    def node_of_label(self, label) -> int:
        if self.has_identity_labels():
            if not 0 <= label < self.n:
                raise ValueError(f"node {label} not in graph")
            return int(label)
        hits = np.flatnonzero(self.labels == label)
        if hits.size == 0:
            raise ValueError(f"node label {label} not in graph")
        return int(hits[0])


def _check_vector(g, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (g.n,):
        raise ValueError(f"vector of shape {x.shape} does not match n={g.n}")
    return x


def apply_P(g: Graph, x) -> np.ndarray:
    """y(k) = sum over out-neighbors j of k of x(j) / d_in(j)."""
    return g.transition @ _check_vector(g, x)


def apply_P_transpose(g: Graph, x) -> np.ndarray:
    """y(k) = mean of x over the in-neighbors of k (0 when d_in(k) = 0)."""
    return g.reverse_transition @ _check_vector(g, x)


def load_edge_list(path, undirected=False, comment_prefix="#") -> Graph:
    """Parse a whitespace-separated ``u v`` arc list.

    Ids are remapped densely by ascending label, so files that already use
    ids 0..n-1 keep them and save/load round trips are exact.
    """
    src: list[int] = []
    dst: list[int] = []
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith(comment_prefix):
                continue
            tokens = stripped.split()
            if len(tokens) != 2:
                raise GraphFormatError(f"expected 2 tokens, got {len(tokens)}", lineno)
            try:
                u, v = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise GraphFormatError(f"non-integer token in {stripped!r}", lineno) from None
            if u < 0 or v < 0:
                raise GraphFormatError("node ids must be non-negative", lineno)
            src.append(u)
            dst.append(v)
    if not src:
        raise GraphFormatError(f"{path}: no arcs found")
    labels, inv = np.unique(np.array(src + dst, dtype=np.int64), return_inverse=True)
    s_idx, d_idx = inv[: len(src)], inv[len(src):]
    if undirected:
        s_idx, d_idx = np.concatenate([s_idx, d_idx]), np.concatenate([d_idx, s_idx])
    return Graph.from_arcs(labels.size, s_idx, d_idx, labels=labels)


def save_edge_list(g: Graph, path):
    """Write arcs with their original labels, grouped by source."""
    src = np.repeat(np.arange(g.n), g.out_deg)
    with open(path, "w") as fh:
        fh.write(f"# n={g.n} m={g.m}\n")
        for u, v in zip(g.labels[src], g.labels[g.out_idx]):
            fh.write(f"{u} {v}\n")


def _label_path(path):
    return Path(str(path) + ".map.csv")


def save_binary(g: Graph, path):
    """XSGRAPH1 cache; non-identity labels go to a ``.map.csv`` sidecar."""
    with open(path, "wb") as fh:
        fh.write(GRAPH_MAGIC)
        fh.write(struct.pack("<QQ", g.n, g.m))
        for a in (g.in_ptr, g.in_idx, g.out_ptr, g.out_idx):
            fh.write(a.astype("<u8").tobytes())
    if not g.has_identity_labels():
        write_label_map(g, _label_path(path))


def write_label_map(g: Graph, path):
    with open(path, "w") as fh:
        fh.write("node,label\n")
        for i, lab in enumerate(g.labels):
            fh.write(f"{i},{lab}\n")


def load_binary(path) -> Graph:
    raw = Path(path).read_bytes()
    if raw[:8] != GRAPH_MAGIC:
        raise GraphFormatError(f"{path}: bad magic")
    n, m = struct.unpack_from("<QQ", raw, 8)
    expected = 24 + 8 * (2 * (n + 1) + 2 * m)
    if len(raw) != expected:
        raise GraphFormatError(f"{path}: truncated cache ({len(raw)} bytes, expected {expected})")
    arr = np.frombuffer(raw, dtype="<u8", offset=24).astype(np.int64)
    in_ptr, rest = arr[: n + 1], arr[n + 1:]
    in_idx, rest = rest[:m], rest[m:]
    out_ptr, out_idx = rest[: n + 1], rest[n + 1:]
    labels = np.arange(n, dtype=np.int64)
    lp = _label_path(path)
    if lp.exists():
        labels = np.loadtxt(lp, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)[:, 1]
    for a in (in_ptr, in_idx, out_ptr, out_idx, labels):
        a.flags.writeable = False
    g = Graph(in_ptr, in_idx, out_ptr, out_idx, labels)
    if in_ptr[-1] != m or out_ptr[-1] != m:
        raise GraphFormatError(f"{path}: offsets inconsistent with m={m}")
    return g


def load_graph(path, undirected=False) -> Graph:
    """Load either an XSGRAPH1 cache or a text edge list, by sniffing the magic."""
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head == GRAPH_MAGIC:
        return load_binary(path)
    return load_edge_list(path, undirected=undirected)
