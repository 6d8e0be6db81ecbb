"""Seeded sqrt(c)-walk simulation and paired meeting trials.

A sqrt(c)-walk standing at ``v`` stops with probability ``1 - sqrt(c)``,
otherwise steps to a uniform in-neighbor of ``v``; at a node without
in-neighbors it stops unconditionally.  Two walks *meet* when, at some step
``t >= 1``, both are still active and occupy the same node.

Random numbers come from substreams keyed by ``(purpose, node, block)``
where ``block = trial_index // TRIAL_BLOCK``.  The keys never involve worker
ids, so any schedule over workers reproduces the serial run exactly.
"""
from __future__ import annotations

import enum
import zlib
from dataclasses import dataclass

import numpy as np

from .graph import Graph

TRIAL_BLOCK = 1 << 16
_SEED_MASK = (1 << 64) - 1


def _purpose_code(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


@dataclass(frozen=True)
class RandomSource:
    master_seed: int

    def stream(self, purpose: str, node: int = 0, block: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence(
            self.master_seed & _SEED_MASK,
            spawn_key=(_purpose_code(purpose), int(node), int(block)),
        )
        return np.random.Generator(np.random.PCG64(ss))

    def trial_blocks(self, purpose: str, node: int, trials: int):
        """Yield ``(generator, block_size)`` covering ``trials`` trials."""
        block = 0
        while trials > 0:
            size = min(trials, TRIAL_BLOCK)
            yield self.stream(purpose, node, block), size
            trials -= size
            block += 1


class TrialKind(enum.IntEnum):
    SURVIVED = 0
    MET_WITHIN_PREFIX = 1
    WALK_DIED = 2


@dataclass(frozen=True)
class PrefixTrialOutcome:
    kind: TrialKind
    survivors: tuple[int, int] | None = None


def _step(g: Graph, pos, u):
    """Move every walk in ``pos`` to an in-neighbor picked by uniforms ``u``.

    Callers guarantee ``in_deg[pos] > 0``.
    """
    deg = g.in_deg[pos]
    off = np.minimum((u * deg).astype(np.int64), deg - 1)
    return g.in_idx[g.in_ptr[pos] + off]


def pair_meetings(g: Graph, xs, ys, rng: np.random.Generator, c: float) -> np.ndarray:
    """For each start pair (xs[t], ys[t]) run two sqrt(c)-walks; True where they meet.

    Starting co-located does not count.  A pair is dropped from the loop as
    soon as either walk stops, since a stopped walk never meets again.
    """
    sqrt_c = np.sqrt(c)
    xs = np.array(xs, dtype=np.int64, copy=True)
    ys = np.array(ys, dtype=np.int64, copy=True)
    met = np.zeros(xs.shape[0], dtype=bool)
    active = np.arange(xs.shape[0])
    while active.size:
        u = rng.random((4, active.size))
        go = (u[0] < sqrt_c) & (u[1] < sqrt_c) & (g.in_deg[xs] > 0) & (g.in_deg[ys] > 0)
        active = active[go]
        nx = _step(g, xs[go], u[2, go])
        ny = _step(g, ys[go], u[3, go])
        hit = nx == ny
        met[active[hit]] = True
        miss = ~hit
        active, xs, ys = active[miss], nx[miss], ny[miss]
    return met


def nonstop_prefixes(g: Graph, k: int, prefix_len: int, count: int, rng: np.random.Generator):
    """Run ``count`` pairs of non-stopping walks from ``k`` for ``prefix_len`` steps.

    Returns ``(kind, x, y)`` arrays.  ``x, y`` are the end nodes, meaningful
    only where ``kind == SURVIVED``.  With ``prefix_len == 0`` every pair
    survives at ``(k, k)`` and no randomness is consumed.
    """
    kind = np.full(count, TrialKind.SURVIVED, dtype=np.int8)
    xs = np.full(count, k, dtype=np.int64)
    ys = np.full(count, k, dtype=np.int64)
    active = np.arange(count)
    for _ in range(prefix_len):
        if not active.size:
            break
        x, y = xs[active], ys[active]
        dead = (g.in_deg[x] == 0) | (g.in_deg[y] == 0)
        kind[active[dead]] = TrialKind.WALK_DIED
        active, x, y = active[~dead], x[~dead], y[~dead]
        u = rng.random((2, active.size))
        x = _step(g, x, u[0])
        y = _step(g, y, u[1])
        hit = x == y
        kind[active[hit]] = TrialKind.MET_WITHIN_PREFIX
        xs[active], ys[active] = x, y
        active = active[~hit]
    return kind, xs, ys


def paired_meeting_trial(g: Graph, k: int, rng: np.random.Generator, c: float) -> bool:
    return bool(pair_meetings(g, [k], [k], rng, c)[0])


def nonstop_prefix_pair_trial(g: Graph, k: int, prefix_len: int, rng: np.random.Generator) -> PrefixTrialOutcome:
    kind, xs, ys = nonstop_prefixes(g, k, prefix_len, 1, rng)
    kind = TrialKind(int(kind[0]))
    if kind is TrialKind.SURVIVED:
        return PrefixTrialOutcome(kind, (int(xs[0]), int(ys[0])))
    return PrefixTrialOutcome(kind)


def continuation_meet_trial(g: Graph, x: int, y: int, rng: np.random.Generator, c: float) -> bool:
    return bool(pair_meetings(g, [x], [y], rng, c)[0])


def sample_walk_paths(g: Graph, start: int, count: int, rng: np.random.Generator, c: float, max_len: int) -> np.ndarray:
    """``count`` sqrt(c)-walks from ``start``, at most ``max_len`` steps each.

    Row ``t`` lists the node occupied at every step, padded with -1 once
    the walk has stopped.
    """
    sqrt_c = np.sqrt(c)
    paths = np.full((count, max_len + 1), -1, dtype=np.int64)
    paths[:, 0] = start
    active = np.arange(count)
    pos = np.full(count, start, dtype=np.int64)
    for step in range(1, max_len + 1):
        if not active.size:
            break
        u = rng.random((2, active.size))
        go = (u[0] < sqrt_c) & (g.in_deg[pos] > 0)
        active, pos = active[go], _step(g, pos[go], u[1, go])
        paths[active, step] = pos
    return paths


def walk_lengths(g: Graph, start: int, count: int, rng: np.random.Generator, c: float) -> np.ndarray:
    """Number of steps taken by each of ``count`` uncapped sqrt(c)-walks."""
    sqrt_c = np.sqrt(c)
    lengths = np.zeros(count, dtype=np.int64)
    active = np.arange(count)
    pos = np.full(count, start, dtype=np.int64)
    while active.size:
        u = rng.random((2, active.size))
        go = (u[0] < sqrt_c) & (g.in_deg[pos] > 0)
        active, pos = active[go], _step(g, pos[go], u[1, go])
        lengths[active] += 1
    return lengths
