"""Ordered graph trees, finite metric trees, subtrees, projections and measures.

Two tree flavours are used throughout the package:

* :class:`OrderedTree` is a rooted plane tree with the graph metric.  Vertices
  are integers ``0..n-1``.
* :class:`MetricTree` is a finite real tree.  Nodes are integers, every
  non-root node ``v`` owns the edge joining it to its parent, and a point on
  the tree is a :class:`TreePoint` ``(edge, offset)`` with the offset measured
  from the parent end of the edge.

Subtrees spanned by the root and a list of targets are built with
:func:`spanning_subtree`; points are mapped onto them with
:func:`project_to_subtree` and measures with :func:`pushforward_measure`.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .exceptions import DomainError

POINT_TOL = 1e-12
MASS_RTOL = 1e-9


# --------------------------------------------------------------------------
# ordered graph trees
# --------------------------------------------------------------------------

class OrderedTree:
    """Rooted ordered tree on vertices ``0..n-1``.

    Parameters
    ----------
    children : sequence of sequences
        ``children[v]`` lists the children of ``v`` from left to right.
    root : int
        Root vertex.
    """

    def __init__(self, children: Sequence[Sequence[int]], root: int = 0):
        ch = tuple(tuple(int(c) for c in cs) for cs in children)
        n = len(ch)
        if n < 1:
            raise DomainError("a tree needs at least one vertex")
        if not 0 <= root < n:
            raise DomainError(f"root {root} out of range")
        parent = np.full(n, -1, dtype=np.int64)
        for v, cs in enumerate(ch):
            for c in cs:
                if not 0 <= c < n:
                    raise DomainError(f"child {c} of {v} out of range")
                if c == root or parent[c] != -1:
                    raise DomainError(f"vertex {c} has more than one parent")
                parent[c] = v
        # reachability from the root rules out cycles and orphans
        seen = 0
        stack = [root]
        while stack:
            v = stack.pop()
            seen += 1
            stack.extend(ch[v])
            if seen > n:
                break
        if seen != n:
            raise DomainError("children lists do not form a single tree")
        self.children = ch
        self.root = int(root)
        self.n = n
        parent.setflags(write=False)
        self.parent = parent

    @classmethod
    def from_parents(cls, parents: Sequence[int]) -> "OrderedTree":
        """Build from a parent array (``-1`` at the root); children keep index order."""
        parents = [int(p) for p in parents]
        roots = [v for v, p in enumerate(parents) if p == -1]
        if len(roots) != 1:
            raise DomainError("parent array must contain exactly one root")
        children = [[] for _ in parents]
        for v, p in enumerate(parents):
            if p != -1:
                if not 0 <= p < len(parents):
                    raise DomainError(f"parent {p} out of range")
                children[p].append(v)
        return cls(children, roots[0])

    @classmethod
    def path(cls, n: int) -> "OrderedTree":
        return cls([[v + 1] for v in range(n - 1)] + [[]])

    @classmethod
    def star(cls, leaves: int) -> "OrderedTree":
        return cls([list(range(1, leaves + 1))] + [[] for _ in range(leaves)])

    def __eq__(self, other):
        return (isinstance(other, OrderedTree) and self.root == other.root
                and self.children == other.children)

    def __hash__(self):
        return hash((self.root, self.children))

    def __repr__(self):
        return f"OrderedTree(n={self.n})"

    @cached_property
    def preorder(self) -> np.ndarray:
        order = np.empty(self.n, dtype=np.int64)
        stack = [self.root]
        i = 0
        while stack:
            v = stack.pop()
            order[i] = v
            i += 1
            stack.extend(reversed(self.children[v]))
        order.setflags(write=False)
        return order

    @cached_property
    def depth(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=np.int64)
        for v in self.preorder[1:]:
            d[v] = d[self.parent[v]] + 1
        d.setflags(write=False)
        return d

    @cached_property
    def degree(self) -> np.ndarray:
        deg = np.array([len(c) for c in self.children], dtype=np.int64)
        deg[self.parent >= 0] += 1
        deg.setflags(write=False)
        return deg

    @cached_property
    def adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR neighbour lists ``(indptr, indices)``; parent first, then children in order."""
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(self.degree, out=indptr[1:])
        indices = np.empty(indptr[-1], dtype=np.int64)
        for v in range(self.n):
            k = indptr[v]
            if self.parent[v] >= 0:
                indices[k] = self.parent[v]
                k += 1
            cs = self.children[v]
            indices[k:k + len(cs)] = cs
        indptr.setflags(write=False)
        indices.setflags(write=False)
        return indptr, indices

    def neighbors(self, v: int) -> np.ndarray:
        indptr, indices = self.adjacency
        return indices[indptr[v]:indptr[v + 1]]

    @property
    def offspring(self) -> np.ndarray:
        """Child counts in preorder; this sequence determines the ordered shape."""
        return np.array([len(self.children[v]) for v in self.preorder], dtype=np.int64)

    def shape_key(self) -> tuple:
        return tuple(int(c) for c in self.offspring)

    def relabel_preorder(self) -> "OrderedTree":
        """Isomorphic copy whose labels are the preorder ranks."""
        rank = np.empty(self.n, dtype=np.int64)
        rank[self.preorder] = np.arange(self.n)
        children = [None] * self.n
        for v in range(self.n):
            children[rank[v]] = [int(rank[c]) for c in self.children[v]]
        return OrderedTree(children, 0)

    def _check_vertex(self, v):
        if isinstance(v, (bool, np.bool_)) or not isinstance(v, (int, np.integer)):
            raise DomainError(f"vertex {v!r} is not an integer")
        if not 0 <= v < self.n:
            raise DomainError(f"vertex {v} out of range for n={self.n}")
        return int(v)

    def distances_from(self, v: int) -> np.ndarray:
        """Graph distance from ``v`` to every vertex (BFS)."""
        v = self._check_vertex(v)
        indptr, indices = self.adjacency
        dist = np.full(self.n, -1, dtype=np.int64)
        dist[v] = 0
        queue = deque([v])
        while queue:
            u = queue.popleft()
            for w in indices[indptr[u]:indptr[u + 1]]:
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return dist


def graph_distance(t: OrderedTree, u: int, v: int) -> int:
    """Number of edges on the path between vertices ``u`` and ``v``."""
    u = t._check_vertex(u)
    v = t._check_vertex(v)
    depth, parent = t.depth, t.parent
    d = 0
    while depth[u] > depth[v]:
        u = parent[u]
        d += 1
    while depth[v] > depth[u]:
        v = parent[v]
        d += 1
    while u != v:
        u, v = parent[u], parent[v]
        d += 2
    return d


class GraphSubtree:
    """Root-containing, ancestor-closed vertex subset of an :class:`OrderedTree`.

    Vertices keep their host labels.  ``deg_sub[v]`` is the degree of ``v``
    inside the subtree (0 outside it).
    """

    def __init__(self, host: OrderedTree, mask: np.ndarray):
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (host.n,):
            raise DomainError("mask length differs from the host vertex count")
        if not mask[host.root]:
            raise DomainError("subtree must contain the root")
        par = host.parent
        nonroot = np.flatnonzero(mask & (par >= 0))
        if not mask[par[nonroot]].all():
            raise DomainError("vertex set is not a connected subtree containing the root")
        mask = mask.copy()
        mask.setflags(write=False)
        self.host = host
        self.mask = mask
        deg = np.zeros(host.n, dtype=np.int64)
        np.add.at(deg, nonroot, 1)
        np.add.at(deg, par[nonroot], 1)
        deg.setflags(write=False)
        self.deg_sub = deg

    @classmethod
    def from_vertices(cls, host: OrderedTree, vertices: Iterable[int]) -> "GraphSubtree":
        mask = np.zeros(host.n, dtype=bool)
        mask[[host._check_vertex(v) for v in vertices]] = True
        return cls(host, mask)

    @property
    def vertices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def n_vertices(self) -> int:
        return int(self.mask.sum())

    @property
    def n_edges(self) -> int:
        return self.n_vertices - 1

    def __contains__(self, v):
        return bool(self.mask[v])

    @cached_property
    def projection(self) -> np.ndarray:
        """``projection[v]`` is the nearest subtree vertex to host vertex ``v``."""
        t = self.host
        proj = np.arange(t.n, dtype=np.int64)
        for v in t.preorder[1:]:
            if not self.mask[v]:
                proj[v] = proj[t.parent[v]]
        proj.setflags(write=False)
        return proj

    def project(self, v: int) -> int:
        return int(self.projection[self.host._check_vertex(v)])

    def max_projection_distance(self) -> int:
        """Largest graph distance between a host vertex and its projection."""
        d = self.host.depth
        return int((d - d[self.projection]).max())


# --------------------------------------------------------------------------
# metric trees
# --------------------------------------------------------------------------

class TreePoint(NamedTuple):
    """Point of a metric tree: ``offset`` along ``edge`` measured from the parent end."""
    edge: int
    offset: float


class MetricTree:
    """Finite real tree with a root and a designated leaf sequence.

    Parameters
    ----------
    parent : array of int
        ``parent[v]`` for every node; exactly one entry is ``-1`` (the root).
    length : array of float
        ``length[v]`` is the length of the edge from ``parent[v]`` to ``v``.
        The root entry is ignored.
    leaves : sequence of int, optional
        Designated leaf order ``sigma_1..sigma_k``.  Defaults to the degree-one
        non-root nodes in preorder.
    """

    def __init__(self, parent, length, leaves=None):
        parent = np.array(parent, dtype=np.int64)
        length = np.array(length, dtype=float)
        n = parent.size
        if n < 1 or length.shape != (n,):
            raise DomainError("parent and length arrays must have equal positive size")
        roots = np.flatnonzero(parent == -1)
        if roots.size != 1:
            raise DomainError("exactly one node must have parent -1")
        root = int(roots[0])
        length[root] = 0.0
        nonroot = parent != -1
        if np.any((parent < -1) | (parent >= n)):
            raise DomainError("parent index out of range")
        if np.any(~(length[nonroot] > 0)) or not np.all(np.isfinite(length)):
            raise DomainError("edge lengths must be finite and strictly positive")
        children = [[] for _ in range(n)]
        for v in range(n):
            if parent[v] >= 0:
                children[parent[v]].append(v)
        # preorder traversal doubles as the acyclicity check
        pre = []
        stack = [root]
        while stack and len(pre) <= n:
            v = stack.pop()
            pre.append(v)
            stack.extend(reversed(children[v]))
        if len(pre) != n:
            raise DomainError("parent array does not describe a tree")
        self.root = root
        self.parent = parent
        self.length = length
        self.children = tuple(tuple(c) for c in children)
        self.n_nodes = n
        self.preorder = np.array(pre, dtype=np.int64)
        depth = np.zeros(n)
        level = np.zeros(n, dtype=np.int64)
        for v in pre[1:]:
            depth[v] = depth[parent[v]] + length[v]
            level[v] = level[parent[v]] + 1
        self.depth = depth
        self.level = level
        # Euler entry/exit times for ancestor tests
        tin = np.empty(n, dtype=np.int64)
        tin[self.preorder] = np.arange(n)
        size = np.ones(n, dtype=np.int64)
        for v in pre[:0:-1]:
            size[parent[v]] += size[v]
        self._tin = tin
        self._tout = tin + size
        deg = np.array([len(c) for c in children], dtype=np.int64)
        deg[nonroot] += 1
        self.degree = deg
        if leaves is None:
            leaves = [v for v in pre if v != root and deg[v] == 1]
        leaves = tuple(int(x) for x in leaves)
        for x in leaves:
            if not 0 <= x < n:
                raise DomainError(f"designated leaf {x} out of range")
        self.leaves = leaves
        for arr in (self.parent, self.length, self.preorder, self.depth, self.level, self.degree):
            arr.setflags(write=False)

    # ---- constructors -------------------------------------------------------

    @classmethod
    def from_edges(cls, edges, root: int = 0, leaves=None) -> "MetricTree":
        """Build from undirected ``(u, v, length)`` triples over nodes ``0..N-1``."""
        edges = [(int(u), int(v), float(w)) for u, v, w in edges]
        n = 1 + max([root] + [max(u, v) for u, v, _ in edges])
        if len(edges) != n - 1:
            raise DomainError("a tree on N nodes needs exactly N-1 edges")
        adj = [[] for _ in range(n)]
        for u, v, w in edges:
            adj[u].append((v, w))
            adj[v].append((u, w))
        parent = np.full(n, -2, dtype=np.int64)
        length = np.zeros(n)
        parent[root] = -1
        stack = [root]
        while stack:
            u = stack.pop()
            for v, w in adj[u]:
                if parent[v] == -2:
                    parent[v] = u
                    length[v] = w
                    stack.append(v)
        if np.any(parent == -2):
            raise DomainError("edge list is not connected")
        return cls(parent, length, leaves)

    @classmethod
    def from_ordered(cls, t: OrderedTree, edge_length: float = 1.0, leaves=None) -> "MetricTree":
        """Metric version of a graph tree with every edge of length ``edge_length``."""
        length = np.full(t.n, float(edge_length))
        return cls(t.parent, length, leaves)

    @classmethod
    def segment(cls, length: float = 1.0) -> "MetricTree":
        """Segment ``[0, length]`` rooted at 0; node 1 is the far end."""
        return cls([-1, 0], [0.0, length])

    @classmethod
    def star(cls, arms: Sequence[float]) -> "MetricTree":
        """Star rooted at its centre (node 0) with arm ``i`` ending at node ``i+1``."""
        return cls([-1] + [0] * len(arms), [0.0] + list(arms))

    def rescale(self, c: float) -> "MetricTree":
        if not c > 0:
            raise DomainError("scale factor must be positive")
        return MetricTree(self.parent, self.length * c, self.leaves)

    def with_leaves(self, leaves) -> "MetricTree":
        return MetricTree(self.parent, self.length, leaves)

    def __repr__(self):
        return f"MetricTree(nodes={self.n_nodes}, length={self.total_length:.6g})"

    def __eq__(self, other):
        return (isinstance(other, MetricTree) and np.array_equal(self.parent, other.parent)
                and np.array_equal(self.length, other.length) and self.leaves == other.leaves)

    __hash__ = object.__hash__

    # ---- scalar summaries ---------------------------------------------------

    @property
    def total_length(self) -> float:
        return float(self.length.sum())

    @property
    def shortest_edge(self) -> float:
        mask = self.parent >= 0
        return float(self.length[mask].min()) if mask.any() else np.inf

    @cached_property
    def diameter(self) -> float:
        d = self.distances_from(self.node(self.root))
        far = int(np.argmax(d))
        return float(self.distances_from(self.node(far)).max())

    # ---- points -------------------------------------------------------------

    def node(self, v: int) -> TreePoint:
        v = int(v)
        if not 0 <= v < self.n_nodes:
            raise DomainError(f"node {v} out of range")
        if v == self.root:
            return TreePoint(v, 0.0)
        return TreePoint(v, float(self.length[v]))

    def point(self, edge: int, offset: float) -> TreePoint:
        """Canonical point at ``offset`` along ``edge``; node-coincident offsets snap to nodes."""
        edge = int(edge)
        if not 0 <= edge < self.n_nodes:
            raise DomainError(f"edge {edge} out of range")
        offset = float(offset)
        if edge == self.root:
            if abs(offset) > POINT_TOL:
                raise DomainError("the root carries no edge")
            return TreePoint(edge, 0.0)
        ell = self.length[edge]
        if not -POINT_TOL <= offset <= ell + POINT_TOL:
            raise DomainError(f"offset {offset} outside [0, {ell}] on edge {edge}")
        if offset <= POINT_TOL:
            return self.node(self.parent[edge])
        if offset >= ell - POINT_TOL:
            return TreePoint(edge, float(ell))
        return TreePoint(edge, offset)

    def as_point(self, x) -> TreePoint:
        """Accept a node id or an ``(edge, offset)`` pair and return a canonical point."""
        if isinstance(x, (int, np.integer)):
            return self.node(x)
        e, off = x
        return self.point(e, off)

    def node_of(self, p: TreePoint):
        """Node id at ``p`` or ``None`` when ``p`` is interior to an edge."""
        e, off = p
        if e == self.root or off >= self.length[e] - POINT_TOL:
            return int(e)
        return None

    def point_depth(self, p: TreePoint) -> float:
        e, off = p
        if e == self.root:
            return 0.0
        return float(self.depth[self.parent[e]] + off)

    def is_ancestor(self, a: int, b: int) -> bool:
        """True when node ``a`` lies on the root path of node ``b`` (inclusive)."""
        return bool(self._tin[a] <= self._tin[b] and self._tout[b] <= self._tout[a])

    def lca(self, a: int, b: int) -> int:
        while not self.is_ancestor(a, b):
            a = int(self.parent[a])
        return int(a)

    def meet(self, p: TreePoint, q: TreePoint) -> TreePoint:
        """Deepest common point of the root paths to ``p`` and ``q``."""
        a, b = p.edge, q.edge
        if a == b:
            return p if p.offset <= q.offset else q
        if self.is_ancestor(a, b):
            return p
        if self.is_ancestor(b, a):
            return q
        return self.node(self.lca(a, b))

    def distance(self, p, q) -> float:
        p, q = self.as_point(p), self.as_point(q)
        m = self.meet(p, q)
        d = self.point_depth(p) + self.point_depth(q) - 2.0 * self.point_depth(m)
        return max(d, 0.0)

    def point_on_root_path(self, p: TreePoint, depth: float) -> TreePoint:
        """Point of ``[[root, p]]`` at the given depth."""
        if depth <= POINT_TOL:
            return self.node(self.root)
        if depth > self.point_depth(p) + POINT_TOL:
            raise DomainError("requested depth exceeds the depth of the point")
        e = p.edge
        while e != self.root:
            top = self.depth[self.parent[e]]
            if depth >= top - POINT_TOL:
                return self.point(e, min(depth - top, self.length[e]))
            e = int(self.parent[e])
        return self.node(self.root)

    def point_between(self, p, q, s: float) -> TreePoint:
        """Point on the geodesic from ``p`` to ``q`` at distance ``s`` from ``p``."""
        p, q = self.as_point(p), self.as_point(q)
        m = self.meet(p, q)
        dp, dq, dm = self.point_depth(p), self.point_depth(q), self.point_depth(m)
        if s <= dp - dm:
            return self.point_on_root_path(p, dp - s)
        return self.point_on_root_path(q, min(dm + s - (dp - dm), dq))

    def distances_from(self, p) -> np.ndarray:
        """Distance from point ``p`` to every node."""
        p = self.as_point(p)
        n = self.n_nodes
        dist = np.full(n, np.inf)
        e, off = p
        queue = deque()
        if e == self.root:
            dist[e] = 0.0
            queue.append(e)
        else:
            dist[e] = self.length[e] - off
            dist[self.parent[e]] = off
            queue.extend([e, int(self.parent[e])])
        seen = np.zeros(n, dtype=bool)
        while queue:
            u = queue.popleft()
            if seen[u]:
                continue
            seen[u] = True
            nbrs = list(self.children[u])
            if self.parent[u] >= 0:
                nbrs.append(int(self.parent[u]))
            for w in nbrs:
                if seen[w]:
                    continue
                edge_len = self.length[w] if self.parent[w] == u else self.length[u]
                dist[w] = min(dist[w], dist[u] + edge_len)
                queue.append(w)
        return dist

    def leaf_points(self) -> list[TreePoint]:
        return [self.node(v) for v in self.leaves]

    def random_point(self, rng: np.random.Generator) -> TreePoint:
        """Point drawn from the normalised length measure."""
        edges = np.flatnonzero(self.parent >= 0)
        w = self.length[edges]
        e = int(rng.choice(edges, p=w / w.sum()))
        return self.point(e, rng.uniform(0.0, self.length[e]))


def branch_point(t: MetricTree, s, s1, s2) -> TreePoint:
    """The unique common point of the three geodesics joining ``s``, ``s1``, ``s2``."""
    s, s1, s2 = t.as_point(s), t.as_point(s1), t.as_point(s2)
    meets = (t.meet(s, s1), t.meet(s1, s2), t.meet(s, s2))
    return max(meets, key=t.point_depth)


# --------------------------------------------------------------------------
# spanning subtrees of metric trees
# --------------------------------------------------------------------------

class SubTree(MetricTree):
    """Metric subtree spanned by the root of ``host`` and a list of targets.

    Degree-two points are contracted away except for the root and the
    targets, which are always nodes.  ``node_host[i]`` is the host point of
    subtree node ``i`` and ``cover[e]`` the covered length of host edge ``e``
    measured from its parent end.
    """

    def __init__(self, parent, length, leaves, host: MetricTree, node_host, cover, keys, down):
        super().__init__(parent, length, leaves)
        self.host = host
        self.node_host = tuple(node_host)
        self.cover = cover
        self._keys = keys
        self._down = down

    def with_leaves(self, leaves) -> "SubTree":
        return SubTree(self.parent, self.length, leaves, self.host, self.node_host,
                       self.cover, self._keys, self._down)

    def covers(self, q: TreePoint) -> bool:
        e, off = q
        return e == self.host.root or off <= self.cover[e] + POINT_TOL

    def to_host(self, p: TreePoint) -> TreePoint:
        """Host coordinates of a subtree point."""
        p = self.as_point(p)
        c = p.edge
        if c == self.root:
            return self.node_host[c]
        top = self.depth[self.parent[c]]
        return self.host.point_on_root_path(self.node_host[c], top + p.offset)

    def from_host(self, q: TreePoint) -> TreePoint:
        """Subtree coordinates of a covered host point."""
        h = self.host
        q = h.as_point(q)
        if not self.covers(q):
            raise DomainError(f"host point {q} is not covered by the subtree")
        dq = h.point_depth(q)
        e, off = q
        while True:
            for k_off, k_id in self._keys.get(e, ()):
                if k_off >= off - POINT_TOL:
                    if abs(k_off - off) <= POINT_TOL:
                        return self.node(k_id)
                    return self.point(k_id, dq - self.depth[self.parent[k_id]])
            e = self._down[e]
            off = 0.0

    def project(self, q) -> TreePoint:
        """Host point of the subtree nearest to host point ``q``."""
        h = self.host
        e, off = h.as_point(q)
        while e != h.root:
            c = self.cover[e]
            if off <= c + POINT_TOL:
                return h.point(e, off)
            if c > 0:
                return h.point(e, c)
            e = int(h.parent[e])
            off = h.length[e] if e != h.root else 0.0
        return h.node(h.root)

    def max_projection_distance(self) -> float:
        """Supremum over host points of the distance to the subtree."""
        h = self.host
        # the supremum is attained at a host node
        best = 0.0
        for v in range(h.n_nodes):
            q = h.node(v)
            best = max(best, h.distance(q, self.project(q)))
        return best


def _metric_spanning(t: MetricTree, targets) -> SubTree:
    pts = [t.as_point(x) for x in targets]
    n = t.n_nodes
    parent, length = t.parent, t.length
    cover = np.zeros(n)
    for e, off in pts:
        if e == t.root:
            continue
        cover[e] = max(cover[e], off)
        v = int(parent[e])
        while v != t.root and cover[v] < length[v]:
            cover[v] = length[v]
            v = int(parent[v])

    def covered_children(v):
        return [c for c in t.children[v] if cover[c] > 0]

    key_pts = {t.node(t.root)} | set(pts)
    down = {}
    for v in range(n):
        if v == t.root or cover[v] == length[v]:
            cc = covered_children(v)
            if len(cc) >= 2:
                key_pts.add(t.node(v))
            elif len(cc) == 1:
                down[v] = cc[0]
    ordered = sorted(key_pts, key=lambda p: (t._tin[p.edge], p.offset))
    ids = {p: i for i, p in enumerate(ordered)}
    keys = {}
    for p in ordered:
        keys.setdefault(p.edge, []).append((p.offset, ids[p]))

    sub_parent = np.full(len(ordered), -1, dtype=np.int64)
    sub_length = np.zeros(len(ordered))
    for p in ordered[1:]:
        e, off = p
        above = [k for k in keys[e] if k[0] < off - POINT_TOL]
        v = e
        while not above:
            v = int(parent[v])
            above = keys.get(v, [])
        k_off, k_id = above[-1]
        sub_parent[ids[p]] = k_id
        sub_length[ids[p]] = t.point_depth(p) - t.point_depth(ordered[k_id])
    leaves = [ids[p] for p in pts]
    return SubTree(sub_parent, sub_length, leaves, t, ordered, cover, keys, down)


def spanning_subtree(t, targets):
    """Smallest subtree containing the root and every target.

    For a :class:`MetricTree` the targets are node ids or points and the
    result is a :class:`SubTree` whose designated leaves follow the target
    order.  For an :class:`OrderedTree` the targets are vertices and the
    result is a :class:`GraphSubtree`.
    """
    targets = list(targets)
    if not targets:
        raise DomainError("target list is empty")
    if isinstance(t, OrderedTree):
        mask = np.zeros(t.n, dtype=bool)
        mask[t.root] = True
        for v in targets:
            v = t._check_vertex(v)
            while not mask[v]:
                mask[v] = True
                v = t.parent[v]
        return GraphSubtree(t, mask)
    if isinstance(t, MetricTree):
        return _metric_spanning(t, targets)
    raise DomainError(f"unsupported tree type {type(t).__name__}")


def project_to_subtree(t, sub, x):
    """Nearest point of ``sub`` to ``x``, in host coordinates (or a host vertex)."""
    if sub is t:
        return t._check_vertex(x) if isinstance(t, OrderedTree) else t.as_point(x)
    if isinstance(t, OrderedTree):
        if not isinstance(sub, GraphSubtree) or sub.host is not t:
            raise DomainError("subtree was not built on this tree")
        return sub.project(x)
    if not isinstance(sub, SubTree) or sub.host is not t:
        raise DomainError("subtree was not built on this tree")
    return sub.project(x)


# --------------------------------------------------------------------------
# measures
# --------------------------------------------------------------------------

def _atom_location(loc):
    if isinstance(loc, (int, np.integer)):
        return int(loc)
    return TreePoint(int(loc[0]), float(loc[1]))


@dataclass(frozen=True)
class TreeMeasure:
    """Finite measure made of atoms and piecewise-constant densities.

    ``atoms`` holds ``(location, mass)`` pairs, where a location is a
    :class:`TreePoint` on a metric tree or a vertex id on a graph tree.
    ``pieces`` holds ``(edge, a, b, density)`` with ``0 <= a < b <= length``.
    """
    atoms: tuple = ()
    pieces: tuple = ()

    def __post_init__(self):
        atoms = tuple((_atom_location(loc), float(m)) for loc, m in self.atoms)
        pieces = tuple((int(e), float(a), float(b), float(d)) for e, a, b, d in self.pieces)
        for _, m in atoms:
            if not m > 0:
                raise DomainError("atom masses must be positive")
        for _, a, b, d in pieces:
            if not (a < b and d >= 0):
                raise DomainError("pieces need a < b and non-negative density")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "pieces", pieces)

    @property
    def atom_mass(self) -> float:
        return float(sum(m for _, m in self.atoms))

    @property
    def total_mass(self) -> float:
        return self.atom_mass + float(sum(d * (b - a) for _, a, b, d in self.pieces))

    def scaled(self, c: float) -> "TreeMeasure":
        return TreeMeasure(tuple((p, m * c) for p, m in self.atoms),
                           tuple((e, a, b, d * c) for e, a, b, d in self.pieces))

    def normalized(self) -> "TreeMeasure":
        total = self.total_mass
        if not total > 0:
            raise DomainError("cannot normalise a zero measure")
        return self.scaled(1.0 / total)

    def edge_mass(self, n_edges: int) -> np.ndarray:
        """Density mass per edge id (atoms excluded)."""
        out = np.zeros(n_edges)
        for e, a, b, d in self.pieces:
            out[e] += d * (b - a)
        return out


def length_measure(t: MetricTree, normalized: bool = True) -> TreeMeasure:
    """Length (one-dimensional Hausdorff) measure, optionally of total mass one."""
    edges = np.flatnonzero(t.parent >= 0)
    dens = 1.0 / t.total_length if normalized else 1.0
    return TreeMeasure((), tuple((int(e), 0.0, float(t.length[e]), dens) for e in edges))


def uniform_vertex_measure(t: OrderedTree) -> TreeMeasure:
    """Uniform probability on the vertices of a graph tree."""
    return TreeMeasure(tuple((v, 1.0 / t.n) for v in range(t.n)))


def vertex_masses(mu: TreeMeasure, n: int) -> np.ndarray:
    """Dense per-vertex mass array of a measure on a graph tree."""
    out = np.zeros(n)
    for v, m in mu.atoms:
        if not isinstance(v, int):
            raise DomainError("graph-tree measures must have integer atoms")
        if not 0 <= v < n:
            raise DomainError(f"atom at vertex {v} lies off the tree")
        out[v] += m
    if mu.pieces:
        raise DomainError("graph-tree measures cannot carry densities")
    return out


def _merge_atoms(atoms):
    acc = {}
    for loc, m in atoms:
        acc[loc] = acc.get(loc, 0.0) + m
    return tuple(sorted(acc.items(), key=lambda kv: kv[0] if isinstance(kv[0], int) else tuple(kv[0])))


def pushforward_measure(mu: TreeMeasure, t, sub) -> TreeMeasure:
    """Image of ``mu`` under the projection onto ``sub``.

    Graph subtrees keep host vertex labels; metric subtrees express the
    result in their own coordinates.
    """
    if sub is t:
        return mu
    if isinstance(t, OrderedTree):
        if not isinstance(sub, GraphSubtree) or sub.host is not t:
            raise DomainError("subtree was not built on this tree")
        masses = vertex_masses(mu, t.n)
        out = np.zeros(t.n)
        np.add.at(out, sub.projection, masses)
        return TreeMeasure(tuple((int(v), float(out[v])) for v in np.flatnonzero(out > 0)))
    if not isinstance(sub, SubTree) or sub.host is not t:
        raise DomainError("subtree was not built on this tree")
    atoms = [(sub.from_host(sub.project(p)), m) for p, m in mu.atoms]
    pieces = []
    for e, a, b, d in mu.pieces:
        if e == t.root:
            continue
        c = sub.cover[e]
        hi = min(b, c)
        if hi > a:
            cuts = [a] + [o for o, _ in sub._keys.get(e, ()) if a < o < hi] + [hi]
            for x, y in zip(cuts[:-1], cuts[1:]):
                mid = 0.5 * (x + y)
                sp = sub.from_host(t.point(e, mid))
                pieces.append((sp.edge, sp.offset - (mid - x), sp.offset + (y - mid), d))
        lo = max(a, c)
        if b > lo and d > 0:
            atoms.append((sub.from_host(sub.project(t.point(e, b))), d * (b - lo)))
    return TreeMeasure(_merge_atoms(atoms), tuple(pieces))


# --------------------------------------------------------------------------
# text serialisation
# --------------------------------------------------------------------------

def dumps_tree(t, comments: Sequence[str] = ()) -> str:
    """Line-oriented text form; vertices are listed in preorder."""
    lines = [f"# {c}" for c in comments]
    if isinstance(t, OrderedTree):
        lines.append(f"n {t.n}")
        for v in t.preorder:
            p = int(t.parent[v])
            order = 0 if p < 0 else t.children[p].index(v)
            lines.append(f"{v} {p} {order}")
        return "\n".join(lines) + "\n"
    lines.append(f"n {t.n_nodes}")
    for v in t.preorder:
        p = int(t.parent[v])
        order = 0 if p < 0 else t.children[p].index(v)
        lines.append(f"{v} {p} {order}")
    for v in t.preorder[1:]:
        lines.append(f"edge {int(t.parent[v])} {int(v)} {float(t.length[v])!r}")
    lines.append("leaves " + " ".join(str(x) for x in t.leaves))
    return "\n".join(lines) + "\n"


def loads_tree(text: str):
    """Inverse of :func:`dumps_tree`; returns an ordered or a metric tree."""
    n = None
    rows, edges, leaves = [], [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if parts[0] == "n":
                n = int(parts[1])
            elif parts[0] == "edge":
                edges.append((int(parts[1]), int(parts[2]), float(parts[3])))
            elif parts[0] == "leaves":
                leaves = [int(x) for x in parts[1:]]
            else:
                rows.append((int(parts[0]), int(parts[1]), int(parts[2])))
        except (IndexError, ValueError) as exc:
            raise DomainError(f"malformed tree line {lineno}: {raw!r}") from exc
    if n is None or len(rows) != n:
        raise DomainError("tree text needs an 'n' header and one line per vertex")
    parent = np.full(n, -1, dtype=np.int64)
    slots = [dict() for _ in range(n)]
    for v, p, order in rows:
        if not 0 <= v < n or not -1 <= p < n:
            raise DomainError(f"vertex line out of range: {v} {p}")
        parent[v] = p
        if p >= 0:
            slots[p][order] = v
    children = [[s[k] for k in sorted(s)] for s in slots]
    if not edges:
        roots = np.flatnonzero(parent == -1)
        if roots.size != 1:
            raise DomainError("exactly one root expected")
        return OrderedTree(children, int(roots[0]))
    length = np.zeros(n)
    for u, v, w in edges:
        if parent[v] != u:
            raise DomainError(f"edge {u}-{v} disagrees with the vertex lines")
        length[v] = w
    return MetricTree(parent, length, leaves)


def save_tree(t, path, comments: Sequence[str] = ()) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_tree(t, comments))


def load_tree(path):
    with open(path) as fh:
        return loads_tree(fh.read())
