"""Sequential isometric embedding of metric trees into non-negative l1 coordinates.

Leaves are added in their designated order.  The segment that leaf ``i``
adds to the tree spanned by the earlier leaves gets coordinate ``i`` to
itself, so truncating to the first ``k`` coordinates equals projecting onto
the subtree spanned by the first ``k`` leaves.
"""
from __future__ import annotations

import io

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import DomainError
from .trees import MetricTree, TreePoint


class L1Embedding:
    """Coordinates of every node of ``tree``; points are interpolated along edges.

    ``edge_coord[e]`` is the coordinate carried by edge ``e``: the smallest
    designated-leaf index in the subtree below the edge.
    """

    def __init__(self, tree: MetricTree):
        k = len(tree.leaves)
        n = tree.n_nodes
        first = np.full(n, k, dtype=np.int64)
        for i, v in enumerate(tree.leaves):
            first[v] = min(first[v], i)
        # propagate minimum designated index upward, children before parents
        for v in tree.preorder[:0:-1]:
            p = tree.parent[v]
            first[p] = min(first[p], first[v])
        uncovered = [int(v) for v in range(n) if v != tree.root and first[v] == k]
        if uncovered:
            raise DomainError(
                f"designated leaf order does not span the tree; edges {uncovered[:5]} are uncovered")
        coords = np.zeros((n, k))
        for v in tree.preorder[1:]:
            coords[v] = coords[tree.parent[v]]
            coords[v, first[v]] += tree.length[v]
        coords.setflags(write=False)
        first.setflags(write=False)
        self.tree = tree
        self.k = k
        self.edge_coord = first
        self.node_coords = coords

    def __call__(self, p) -> np.ndarray:
        t = self.tree
        e, off = t.as_point(p)
        if e == t.root:
            return self.node_coords[e].copy()
        x = self.node_coords[t.parent[e]].copy()
        x[self.edge_coord[e]] += off
        return x

    def points(self, pts) -> np.ndarray:
        """Embedded coordinates of a list of points, one row per point."""
        pts = list(pts)
        out = np.zeros((len(pts), self.k))
        for i, p in enumerate(pts):
            out[i] = self(p)
        return out

    def net(self, spacing: float | None = None) -> np.ndarray:
        """Embedded finite net of the whole tree (see :func:`tree_net`)."""
        return self.points(tree_net(self.tree, spacing))

    def to_csv(self, pts, ids=None) -> str:
        """CSV rows ``point-id, coord-1..coord-k`` for the given points."""
        x = self.points(pts)
        ids = list(range(len(x))) if ids is None else list(ids)
        buf = io.StringIO()
        buf.write("point-id," + ",".join(f"coord-{i + 1}" for i in range(self.k)) + "\n")
        for pid, row in zip(ids, x):
            buf.write(str(pid) + "," + ",".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()


def embed(tree: MetricTree) -> L1Embedding:
    """Sequential l1 embedding of ``tree`` in the order of ``tree.leaves``.

    Every leaf of the tree must appear in the designated order, otherwise
    part of the tree would have no coordinate.
    """
    if not tree.leaves and tree.n_nodes > 1:
        raise DomainError("tree has no designated leaf order")
    return L1Embedding(tree)


def pi_k(p, k: int) -> np.ndarray:
    """Keep the first ``k`` coordinates and zero the rest."""
    if int(k) != k or k < 0:
        raise DomainError("k must be a non-negative integer")
    x = np.array(p, dtype=float, copy=True)
    x[..., int(k):] = 0.0
    return x


def _pad(a, width):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[1] < width:
        a = np.hstack([a, np.zeros((a.shape[0], width - a.shape[1]))])
    return a


def hausdorff_distance_l1(A, B) -> float:
    """Hausdorff distance between two finite point sets under the l1 norm.

    Rows are points; missing trailing coordinates count as zero.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.size == 0 or B.size == 0:
        raise DomainError("point sets must be non-empty")
    A = A.reshape(len(A), -1) if A.ndim > 1 else A.reshape(-1, 1)
    B = B.reshape(len(B), -1) if B.ndim > 1 else B.reshape(-1, 1)
    width = max(A.shape[1], B.shape[1])
    A, B = _pad(A, width), _pad(B, width)
    d_ab = cKDTree(B).query(A, p=1)[0].max()
    d_ba = cKDTree(A).query(B, p=1)[0].max()
    return float(max(d_ab, d_ba))


def tree_net(tree: MetricTree, spacing: float | None = None) -> list[TreePoint]:
    """Nodes plus equally spaced points on every edge, gaps at most ``spacing``.

    The default spacing is one hundredth of the diameter.
    """
    if spacing is None:
        spacing = 1e-2 * tree.diameter if tree.n_nodes > 1 else 1.0
    if not spacing > 0:
        raise DomainError("net spacing must be positive")
    pts = [tree.node(v) for v in range(tree.n_nodes)]
    for e in range(tree.n_nodes):
        if e == tree.root:
            continue
        m = int(np.ceil(tree.length[e] / spacing))
        for j in range(1, m):
            pts.append(TreePoint(e, float(tree.length[e] * j / m)))
    return pts
