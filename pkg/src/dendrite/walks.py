"""Simple random walks on ordered trees and their observation on subtrees.

A walk observed through the projection onto a root-containing subtree is
summarised by its jump chain ``J`` and jump times ``A``.  Local times of the
jump chain weight each visit by ``2 / deg``; integrating them against a
measure gives the additive functional ``A_hat`` whose inverse time-changes
``J`` into ``X_hat``.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .exceptions import DomainError
from .streams import as_generator
from .trees import GraphSubtree, OrderedTree, TreeMeasure, vertex_masses

CHUNK = 1 << 20
CHECKPOINT = 1 << 14


@dataclass(frozen=True)
class WalkPath:
    """Vertex sequence ``X_0..X_M`` of a walk on ``tree``."""
    tree: OrderedTree
    vertices: np.ndarray

    @property
    def steps(self) -> int:
        return self.vertices.size - 1

    def to_u32(self) -> bytes:
        """Little-endian uint32 frame of vertex ids."""
        return self.vertices.astype("<u4").tobytes()

    @classmethod
    def from_u32(cls, tree: OrderedTree, data: bytes) -> "WalkPath":
        return cls(tree, np.frombuffer(data, dtype="<u4").astype(np.int64))

    def to_csv(self) -> str:
        buf = io.StringIO()
        np.savetxt(buf, np.column_stack([np.arange(self.vertices.size), self.vertices]),
                   fmt="%d", delimiter=",", header="m,vertex", comments="")
        return buf.getvalue()


def run_srw(t: OrderedTree, steps: int, rng, start: int | None = None) -> WalkPath:
    """Simple random walk of ``steps`` steps from the root (or ``start``)."""
    if int(steps) != steps or steps < 0:
        raise DomainError("steps must be a non-negative integer")
    steps = int(steps)
    rng = as_generator(rng)
    v = t.root if start is None else t._check_vertex(start)
    out = np.empty(steps + 1, dtype=np.int64)
    out[0] = v
    if t.n == 1:
        if steps:
            raise DomainError("a single-vertex tree has no neighbours to walk to")
        return WalkPath(t, out)
    indptr, indices = t.adjacency
    done = 0
    while done < steps:
        m = min(CHUNK, steps - done)
        u = rng.random(m)
        v = _kernels.srw_fill(indptr, indices, v, u, out[done:done + m + 1])
        done += m
    return WalkPath(t, out)


@dataclass(frozen=True)
class ObservedWalk:
    """Walk seen through the projection onto ``sub``.

    ``J`` is the projected path with repeats removed and ``A`` the times at
    which the projection takes each new value, starting from ``A_0 = 0``.
    """
    sub: GraphSubtree
    J: np.ndarray
    A: np.ndarray
    steps: int

    def tau(self, m) -> np.ndarray:
        """``tau(m) = max{l : A_l <= m}``."""
        return np.searchsorted(self.A, m, side="right") - 1

    def reconstruct(self) -> np.ndarray:
        """Projected path recovered as ``J[tau(m)]`` for ``m = 0..steps``."""
        return self.J[self.tau(np.arange(self.steps + 1))]


def observe_on_subtree(x: WalkPath, sub: GraphSubtree) -> ObservedWalk:
    if sub.host is not x.tree:
        raise DomainError("subtree was not built on the walk's tree")
    proj = sub.projection[x.vertices]
    A = np.concatenate([[0], np.flatnonzero(proj[1:] != proj[:-1]) + 1]).astype(np.int64)
    return ObservedWalk(sub, proj[A], A, x.steps)


class DiscreteLocalTimes:
    """Local times ``L_m(v) = (2 / deg_sub(v)) * #{l <= m : J_l = v}``.

    Visit counts are kept sparse: cumulative counts of visited vertices are
    stored every ``checkpoint`` jump-chain steps and queries finish the
    count from the nearest checkpoint.
    """

    def __init__(self, obs: ObservedWalk, checkpoint: int = CHECKPOINT):
        self.obs = obs
        self.checkpoint = int(checkpoint)
        J = obs.J
        verts = np.empty(0, dtype=np.int64)
        counts = np.empty(0, dtype=np.int64)
        marks = [(verts, counts)]
        for start in range(self.checkpoint, J.size, self.checkpoint):
            verts, counts = _merge_counts(verts, counts, J[start - self.checkpoint:start])
            marks.append((verts, counts))
        self._marks = marks

    @property
    def length(self) -> int:
        return self.obs.J.size

    def _weights(self, v):
        deg = self.obs.sub.deg_sub[v]
        return 2.0 / deg

    def counts(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """Visited vertices and their visit counts over ``J_0..J_m``."""
        if not 0 <= m < self.length:
            raise DomainError(f"jump-chain index {m} out of range")
        c = (m + 1) // self.checkpoint
        if c >= len(self._marks):
            c = len(self._marks) - 1
        base_v, base_c = self._marks[c]
        return _merge_counts(base_v, base_c, self.obs.J[c * self.checkpoint:m + 1])

    def at(self, m: int, v: int) -> float:
        verts, counts = self.counts(m)
        i = np.searchsorted(verts, v)
        if i < verts.size and verts[i] == v:
            return float(counts[i] * self._weights(v))
        return 0.0

    def table(self, m: int) -> dict:
        verts, counts = self.counts(m)
        return {int(v): float(c * self._weights(v)) for v, c in zip(verts, counts)}

    def dense(self, m: int) -> np.ndarray:
        out = np.zeros(self.obs.sub.host.n)
        verts, counts = self.counts(m)
        out[verts] = counts * 2.0 / self.obs.sub.deg_sub[verts]
        return out


def _merge_counts(verts, counts, block):
    tail_v, tail_c = np.unique(block, return_counts=True)
    out_v = np.union1d(verts, tail_v)
    out_c = np.zeros(out_v.size, dtype=np.int64)
    out_c[np.searchsorted(out_v, verts)] += counts
    out_c[np.searchsorted(out_v, tail_v)] += tail_c
    return out_v, out_c


def local_times_discrete(obs: ObservedWalk, checkpoint: int = CHECKPOINT) -> DiscreteLocalTimes:
    if obs.sub.n_vertices < 2:
        raise DomainError("local times need a subtree with at least one edge")
    return DiscreteLocalTimes(obs, checkpoint)


def additive_functional_discrete(L: DiscreteLocalTimes, mu: TreeMeasure, n: int) -> np.ndarray:
    """``A_hat_0 = 0`` and ``A_hat_m = n * sum_v L_{m-1}(v) mu({v})``, one value per jump-chain index."""
    sub = L.obs.sub
    masses = vertex_masses(mu, sub.host.n)
    if np.any(masses[~sub.mask] > 0):
        raise DomainError("measure charges vertices outside the subtree")
    J = L.obs.J
    inc = n * 2.0 * masses[J] / sub.deg_sub[J]
    out = np.zeros(J.size)
    np.cumsum(inc[:-1], out=out[1:])
    return out


def time_changed_walk(obs: ObservedWalk, A_hat) -> np.ndarray:
    """``X_hat_m = J[tau_hat(m)]`` for ``m = 0..floor(A_hat[-1])`` with ``tau_hat(m) = max{l : A_hat_l <= m}``."""
    A_hat = np.asarray(A_hat, dtype=float)
    if A_hat.shape != obs.J.shape:
        raise DomainError("additive functional must have one value per jump-chain step")
    if A_hat[0] != 0 or np.any(np.diff(A_hat) < 0):
        raise DomainError("additive functional must start at 0 and be non-decreasing")
    m = np.arange(int(np.floor(A_hat[-1])) + 1)
    return obs.J[np.searchsorted(A_hat, m, side="right") - 1]


def rescaled_subtree_length(sub: GraphSubtree, alpha_n: float) -> float:
    """Edge count of the subtree divided by ``alpha_n``."""
    return sub.n_edges / alpha_n


def max_projection_gap(sub: GraphSubtree) -> int:
    """Largest graph distance from a host vertex to its projection on ``sub``."""
    return sub.max_projection_distance()


def functional_to_csv(A_hat) -> str:
    buf = io.StringIO()
    A_hat = np.asarray(A_hat, dtype=float)
    buf.write("m,A_hat\n")
    for m, a in enumerate(A_hat):
        buf.write(f"{m},{float(a)!r}\n")
    return buf.getvalue()
