"""Piecewise-linear excursions, the tree pseudo-metric they induce, and the
depth-first search-depth encoding of ordered trees."""
from __future__ import annotations

import io
from typing import Sequence

import numpy as np

from .exceptions import DomainError
from .trees import MetricTree, OrderedTree


class Excursion:
    """Continuous piecewise-linear function on ``[0, 1]`` vanishing at both ends.

    Parameters
    ----------
    t : array_like
        Strictly increasing breakpoints from 0 to 1.
    values : array_like
        Function values at the breakpoints.
    strict : bool
        Require strictly positive interior breakpoint values.  Search-depth
        functions return to zero between subtrees and are built non-strict.
    """

    def __init__(self, t, values, strict: bool = True):
        t = np.array(t, dtype=float)
        values = np.array(values, dtype=float)
        if t.ndim != 1 or t.shape != values.shape or t.size < 2:
            raise DomainError("breakpoints and values must be 1-d arrays of equal length >= 2")
        if t[0] != 0.0 or t[-1] != 1.0:
            raise DomainError("breakpoints must start at 0 and end at 1")
        if np.any(np.diff(t) <= 0):
            raise DomainError("breakpoints must be strictly increasing")
        if values[0] != 0.0 or values[-1] != 0.0:
            raise DomainError("excursion must vanish at 0 and 1")
        inner = values[1:-1]
        # piecewise-linear, so positivity at breakpoints is enough
        if strict and np.any(inner <= 0):
            raise DomainError("excursion must be strictly positive inside (0, 1)")
        if np.any(inner < 0) or not np.all(np.isfinite(values)):
            raise DomainError("excursion values must be finite and non-negative")
        t.setflags(write=False)
        values.setflags(write=False)
        self.t = t
        self.values = values
        self.strict = strict

    def __call__(self, s):
        return np.interp(s, self.t, self.values)

    def __repr__(self):
        return f"Excursion(breakpoints={self.t.size}, max={self.values.max():.6g})"

    def __eq__(self, other):
        return (isinstance(other, Excursion) and np.array_equal(self.t, other.t)
                and np.array_equal(self.values, other.values))

    __hash__ = object.__hash__

    def infimum(self, a: float, b: float) -> float:
        """Minimum of the function over ``[min(a,b), max(a,b)]``."""
        lo, hi = min(a, b), max(a, b)
        i, j = np.searchsorted(self.t, [lo, hi], side="right")
        inner = self.values[i:j]
        ends = min(float(self(lo)), float(self(hi)))
        return min(ends, float(inner.min())) if inner.size else ends

    def to_csv(self) -> str:
        buf = io.StringIO()
        np.savetxt(buf, np.column_stack([self.t, self.values]), delimiter=",",
                   header="t,value", comments="", fmt="%.17g")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, strict: bool = True) -> "Excursion":
        lines = text.splitlines()
        if not lines or lines[0].strip().replace(" ", "") != "t,value":
            raise DomainError("excursion CSV needs a 't,value' header row")
        data = np.loadtxt(io.StringIO("\n".join(lines[1:])), delimiter=",", ndmin=2)
        return cls(data[:, 0], data[:, 1], strict=strict)


def _check_unit(*xs):
    for x in xs:
        if not 0.0 <= x <= 1.0:
            raise DomainError(f"time {x} outside [0, 1]")


def excursion_distance(w: Excursion, s: float, t: float) -> float:
    """``w(s) + w(t) - 2 inf w`` over the interval between ``s`` and ``t``."""
    _check_unit(s, t)
    d = float(w(s)) + float(w(t)) - 2.0 * w.infimum(s, t)
    return max(d, 0.0)


def tree_from_excursion(w: Excursion, u: Sequence[float]) -> MetricTree:
    """Metric tree spanned by the root and the points coded by the times ``u``.

    Leaves are inserted one at a time.  Each new point branches off the
    current tree at the depth given by its largest Gromov product with an
    already inserted point.  Coincident points share a node, so the
    designated leaf sequence may repeat nodes or contain interior nodes.
    """
    u = [float(x) for x in u]
    if not u:
        raise DomainError("leaf sample is empty")
    _check_unit(*u)
    if len(set(u)) != len(u):
        raise DomainError("leaf sample values must be pairwise distinct")
    heights = [float(w(x)) for x in u]
    tol = 1e-12 * max(1.0, max(heights))
    parent, length, depth = [-1], [0.0], [0.0]

    def locate(v, h):
        # node at depth h on the root path of node v, splitting an edge if needed
        while parent[v] != -1 and depth[parent[v]] > h + tol:
            v = parent[v]
        if abs(depth[v] - h) <= tol:
            return v
        p = parent[v]
        if abs(depth[p] - h) <= tol:
            return p
        m = len(parent)
        parent.append(p)
        length.append(h - depth[p])
        depth.append(h)
        parent[v] = m
        length[v] = depth[v] - h
        return m

    nodes = []
    for j, (x, hx) in enumerate(zip(u, heights)):
        best_h, best_i = 0.0, -1
        for i in range(j):
            g = 0.5 * (heights[i] + hx - excursion_distance(w, u[i], x))
            if g > best_h:
                best_h, best_i = g, i
        attach = 0 if best_i < 0 else locate(nodes[best_i], min(best_h, heights[best_i]))
        extra = hx - depth[attach]
        if extra <= tol:
            nodes.append(attach)
            continue
        parent.append(attach)
        length.append(extra)
        depth.append(hx)
        nodes.append(len(parent) - 1)
    return MetricTree(parent, length, leaves=nodes)


def dfs_sequence(t: OrderedTree) -> np.ndarray:
    """Vertices visited by the depth-first contour, indices ``0..2n``.

    Each edge is crossed once downward and once upward (``2(n-1)`` moves);
    the remaining indices stay at the root.
    """
    seq = [t.root]
    stack = [(t.root, 0)]
    while stack:
        v, i = stack[-1]
        if i < len(t.children[v]):
            stack[-1] = (v, i + 1)
            c = t.children[v][i]
            seq.append(c)
            stack.append((c, 0))
        else:
            stack.pop()
            if stack:
                seq.append(stack[-1][0])
    seq.extend([t.root] * (2 * t.n + 1 - len(seq)))
    return np.array(seq, dtype=np.int64)


def search_depth(t: OrderedTree) -> Excursion:
    """Depth of the depth-first contour, linear between the grid points ``i/2n``."""
    seq = dfs_sequence(t)
    grid = np.arange(2 * t.n + 1) / (2 * t.n)
    grid[-1] = 1.0
    return Excursion(grid, t.depth[seq].astype(float), strict=False)


def _grid_index(w_n: Excursion, t: OrderedTree) -> int:
    two_n = 2 * t.n
    if w_n.t.size != two_n + 1:
        raise DomainError("excursion is not the search-depth function of this tree")
    return two_n


def point_at(t: OrderedTree, w_n: Excursion, s):
    """Vertex coded by time ``s``.

    ``2ns`` is rounded down when the lower grid point is at least as deep as
    the upper one and rounded up otherwise, so every contour cell is
    credited to the child end of the edge it crosses.  Each vertex then
    receives exactly two cells and uniform times map to uniform vertices.
    Accepts a scalar or an array of times.
    """
    two_n = _grid_index(w_n, t)
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any((s_arr < 0) | (s_arr > 1)):
        raise DomainError("times must lie in [0, 1]")
    x = s_arr * two_n
    near = np.rint(x)
    x = np.where(np.abs(x - near) <= 1e-9, near, x)
    lo = np.floor(x).astype(np.int64)
    hi = np.ceil(x).astype(np.int64)
    vals = w_n.values
    idx = np.where(vals[lo] >= vals[hi], lo, hi)
    out = dfs_sequence(t)[idx]
    return int(out[0]) if np.ndim(s) == 0 else out


def grid_sample(t: OrderedTree) -> np.ndarray:
    """Times ``i/2n`` of the first visit of every vertex by the contour, in preorder."""
    seq = dfs_sequence(t)
    first = {}
    for i, v in enumerate(seq):
        first.setdefault(int(v), i)
    return np.array([first[int(v)] for v in t.preorder]) / (2 * t.n)
