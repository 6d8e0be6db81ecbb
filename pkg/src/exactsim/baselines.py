"""Reference algorithms and exact oracles for small graphs."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .core import backward_accumulate, write_scores_csv
from .errors import GraphFormatError, RefusalError
from .graph import Graph
from .ppr import compute_hop_table
from .walks import RandomSource, sample_walk_paths

SIMMAT_MAGIC = b"XSIMMAT1"
DEFAULT_NODE_CAP = 10_000
ORACLE_NODE_CAP = 2_000


@dataclass
class SimMatrix:
    S: np.ndarray
    residuals: list[float]

    @property
    def n(self) -> int:
        return self.S.shape[0]

    def row(self, i) -> np.ndarray:
        return self.S[i].copy()


def power_method(g: Graph, L_p: int = 60, c: float = 0.6, node_cap: int = DEFAULT_NODE_CAP) -> SimMatrix:
    """All-pairs SimRank by S <- max(c P^T S P, I), starting from S = I.

    ``residuals[t]`` is the max-norm change of iteration t + 1.
    """
    if g.n > node_cap:
        raise RefusalError(
            f"power method needs O(n^2) memory; n={g.n} exceeds node cap {node_cap}"
        )
    pt = g.reverse_transition
    S = np.eye(g.n)
    residuals = []
    for _ in range(L_p):
        # (P^T S P) = pt @ S @ pt.T ; two sparse-dense products
        nxt = c * (pt @ (pt @ S).T).T
        np.fill_diagonal(nxt, 1.0)
        residuals.append(float(np.abs(nxt - S).max()))
        S = nxt
    return SimMatrix(S, residuals)


def save_simmatrix(sm: SimMatrix, path):
    with open(path, "wb") as fh:
        fh.write(SIMMAT_MAGIC)
        fh.write(struct.pack("<Q", sm.n))
        fh.write(np.ascontiguousarray(sm.S, dtype="<f8").tobytes())


def load_simmatrix(path) -> SimMatrix:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != SIMMAT_MAGIC:
        raise GraphFormatError(f"{path}: bad magic")
    (n,) = struct.unpack_from("<Q", raw, 8)
    if len(raw) != 16 + 8 * n * n:
        raise GraphFormatError(f"{path}: truncated matrix")
    S = np.frombuffer(raw, dtype="<f8", offset=16).reshape(n, n).copy()
    return SimMatrix(S, [])


def extract_row_csv(matrix_path, source, out_path):
    write_scores_csv(out_path, load_simmatrix(matrix_path).row(source))


def pair_chain_diag_oracle(g: Graph, k: int, c: float = 0.6, tol: float = 1e-15,
                           max_steps: int | None = None, node_cap: int = ORACLE_NODE_CAP) -> float:
    """D(k,k) by propagating the joint law of two not-yet-met walks.

    ``M[u, v]`` is the probability that both walks are alive, at ``u`` and
    ``v``, and have not met.  One step maps ``M`` to ``c P^T' M P^T``
    (rows of ``P^T`` are one-step laws); the diagonal of the result is new
    meeting mass and is removed.  The matrix stays symmetric, so each
    unordered pair is represented by its two ordered copies.
    """
    if g.n > node_cap:
        raise RefusalError(f"pair-chain oracle limited to n <= {node_cap}, got {g.n}")
    pt = g.reverse_transition
    M = np.zeros((g.n, g.n))
    M[k, k] = 1.0
    met = 0.0
    step = 0
    while True:
        step += 1
        # M' = c * T^T M T with T = pt
        M = c * (pt.T @ (pt.T @ M).T).T
        d = np.diag(M).copy()
        met += d.sum()
        np.fill_diagonal(M, 0.0)
        if max_steps is not None and step >= max_steps:
            break
        if M.sum() <= tol:
            break
    return 1.0 - met


def enumerate_first_meetings(g: Graph, k: int, c: float, horizon: int) -> list[dict[int, float]]:
    """Brute force over all pairs of reverse paths from k, up to ``horizon`` steps.

    Returns ``out[l-1][q]`` = probability that two sqrt(c)-walks from k first
    meet at node q at step l.
    """
    out = [dict() for _ in range(horizon)]

    def rec(x, y, prob, depth):
        if depth == horizon:
            return
        nx_, ny_ = g.in_neighbors(x), g.in_neighbors(y)
        if nx_.size == 0 or ny_.size == 0:
            return
        p = prob * c / (nx_.size * ny_.size)
        for a in nx_:
            for b in ny_:
                if a == b:
                    level = out[depth]
                    level[int(a)] = level.get(int(a), 0.0) + p
                else:
                    rec(a, b, p, depth + 1)

    rec(k, k, 1.0, 0)
    return out


def mc_single_source(g: Graph, i: int, walk_cap: int, walks_per_node: int,
                     rs: RandomSource, c: float = 0.6) -> np.ndarray:
    """Fraction of index-paired walks (t-th of i, t-th of j) that meet."""
    if walks_per_node < 1:
        raise ValueError("walks_per_node must be at least 1")
    paths = {}

    def walks(v):
        if v not in paths:
            paths[v] = sample_walk_paths(g, v, walks_per_node, rs.stream("mc", v), c, walk_cap)
        return paths[v]

    mine = walks(i)[:, 1:]
    alive = mine >= 0
    scores = np.zeros(g.n)
    for j in range(g.n):
        if j == i:
            scores[j] = 1.0
            continue
        other = walks(j)[:, 1:]
        scores[j] = np.mean(np.any((other == mine) & alive, axis=1))
        paths.pop(j, None)
    return scores


def parsim_single_source(g: Graph, i: int, L: int, c: float = 0.6) -> np.ndarray:
    """Linearized series with the diagonal fixed at (1 - c) I (first meetings ignored).

    Dead-end nodes (d_in = 0) keep their exact D = 1 so that an isolated
    source still scores itself 1.
    """
    hop = compute_hop_table(g, i, L, c, 0.0)
    dvals = np.where(g.in_deg == 0, 1.0, 1.0 - c)
    return backward_accumulate(g, dvals, hop, c)
