"""Brownian motion on finite metric trees via a calibrated mesh walk.

Every edge of length ``l`` is cut into ``ceil(l / h)`` equal segments.  From a
mesh node the walk jumps to a neighbour with probability proportional to the
inverse segment length, which is the embedded chain of the Brownian motion on
the mesh nodes.  Each visit to node ``v`` advances the clock by
``c_v = sum_j h_j / (Lambda * sum_j 1/h_j)`` (``h^2 / Lambda`` for equal
spacing, ``Lambda`` the total length), so mean hitting times of mesh nodes
are those of the Brownian motion whose speed measure is the normalised
length measure.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .exceptions import DomainError
from .streams import replica_rng
from .trees import MetricTree, TreeMeasure, TreePoint, branch_point, length_measure

UNIFORM_CHUNK = 1 << 12
UNIFORM_CHUNK_MAX = 1 << 18


class MeshGraph:
    """Subdivision of ``host`` into segments of length at most ``h``.

    Mesh node ``v < host.n_nodes`` is host node ``v``; interior nodes follow,
    edge by edge.  ``edge_nodes[e]`` lists the mesh nodes along edge ``e``
    from the parent end to the child end.
    """

    def __init__(self, host: MetricTree, h: float):
        h = float(h)
        if not h > 0:
            raise DomainError("mesh spacing must be positive")
        if host.n_nodes < 2:
            raise DomainError("a mesh needs a tree with at least one edge")
        if h > host.shortest_edge * (1 + 1e-12):
            raise DomainError(f"mesh spacing {h} exceeds the shortest edge {host.shortest_edge}")
        n0 = host.n_nodes
        points = [host.node(v) for v in range(n0)]
        edge_nodes = {}
        spacing = np.zeros(n0)
        u_list, v_list, g_list = [], [], []
        for e in range(n0):
            if e == host.root:
                continue
            ell = float(host.length[e])
            k = max(1, int(np.ceil(ell / h - 1e-9)))
            g = ell / k
            spacing[e] = g
            ids = [int(host.parent[e])]
            for j in range(1, k):
                ids.append(len(points))
                points.append(TreePoint(e, j * g))
            ids.append(e)
            edge_nodes[e] = np.array(ids, dtype=np.int64)
            u_list.extend(ids[:-1])
            v_list.extend(ids[1:])
            g_list.extend([g] * k)
        n = len(points)
        u = np.array(u_list + v_list, dtype=np.int64)
        v = np.array(v_list + u_list, dtype=np.int64)
        g = np.array(g_list + g_list)
        order = np.lexsort((v, u))
        u, v, g = u[order], v[order], g[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, u + 1, 1)
        indptr = np.cumsum(indptr)
        inv = 1.0 / g
        inv_sum = np.add.reduceat(inv, indptr[:-1])
        seg_sum = np.add.reduceat(g, indptr[:-1])
        cum = np.empty_like(inv)
        for i in range(n):
            lo, hi = indptr[i], indptr[i + 1]
            cum[lo:hi] = np.cumsum(inv[lo:hi]) / inv_sum[i]
        Lam = host.total_length
        self.host = host
        self.h = h
        self.n_nodes = n
        self.points = tuple(points)
        self.edge_nodes = edge_nodes
        self.edge_spacing = spacing
        self.indptr = indptr
        self.indices = v
        self.segment = g
        self.cum = cum
        self.degree = np.diff(indptr)
        # local-time increment per visit and half-cell length around each node
        self.visit_weight = 2.0 / inv_sum
        self.cell_length = seg_sum / 2.0
        self.cost = self.cell_length * self.visit_weight / Lam
        self.total_length = Lam

    def point(self, i: int) -> TreePoint:
        return self.points[int(i)]

    def nearest_node(self, p) -> int:
        """Mesh node closest to a host point."""
        e, off = self.host.as_point(p)
        node = self.host.node_of(TreePoint(e, off))
        if node is not None:
            return node
        j = int(round(off / self.edge_spacing[e]))
        return int(self.edge_nodes[e][j])

    def cell_masses(self, nu: TreeMeasure) -> np.ndarray:
        """``nu``-mass of the half-segment cell around each mesh node; atoms go to the nearest node."""
        out = np.zeros(self.n_nodes)
        for loc, m in nu.atoms:
            if not isinstance(loc, TreePoint):
                raise DomainError("atoms of a metric-tree measure must be tree points")
            out[self.nearest_node(loc)] += m
        for e, a, b, d in nu.pieces:
            if e not in self.edge_nodes:
                raise DomainError(f"measure piece on unknown edge {e}")
            if b > self.host.length[e] * (1 + 1e-12):
                raise DomainError(f"measure piece extends past edge {e}")
            ids = self.edge_nodes[e]
            g = self.edge_spacing[e]
            halves = np.arange(2 * (ids.size - 1) + 1) * (g / 2)
            overlap = np.clip(np.minimum(halves[1:], b) - np.maximum(halves[:-1], a), 0.0, None)
            owner = ids[(np.arange(overlap.size) + 1) // 2]
            np.add.at(out, owner, d * overlap)
        return out

    def functional_weights(self, nu: TreeMeasure) -> np.ndarray:
        """Increment of ``int L_hat dnu`` per visit to each node."""
        return self.cell_masses(nu) * self.visit_weight


def mesh_graph(t: MetricTree, h: float) -> MeshGraph:
    return MeshGraph(t, h)


@dataclass(frozen=True)
class BMPath:
    """Mesh-node sequence with the clock time of each step."""
    mesh: MeshGraph
    nodes: np.ndarray
    clock: np.ndarray

    def position(self, s) -> np.ndarray:
        """Mesh node occupied at clock time ``s`` (last step with clock ``<= s``)."""
        i = np.searchsorted(self.clock, s, side="right") - 1
        return self.nodes[np.maximum(i, 0)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("clock,edge,offset\n")
        for c, v in zip(self.clock, self.nodes):
            e, off = self.mesh.points[v]
            buf.write(f"{float(c)!r},{e},{float(off)!r}\n")
        return buf.getvalue()


def _uniform_chunks(rng):
    size = UNIFORM_CHUNK
    while True:
        yield rng.random(size)
        size = min(2 * size, UNIFORM_CHUNK_MAX)


def run_bm(t: MetricTree, h: float, t_end: float, start, rng, mesh: MeshGraph | None = None) -> BMPath:
    """Mesh walk from ``start`` until the first step whose clock is ``>= t_end``.

    The speed measure is the normalised length measure of ``t``.
    """
    mesh = mesh_graph(t, h) if mesh is None else mesh
    v = mesh.nearest_node(start)
    nodes = [np.array([v], dtype=np.int64)]
    clock = 0.0
    clocks = [np.zeros(1)]
    if t_end > 0:
        for u in _uniform_chunks(rng):
            out = np.empty(u.size + 1, dtype=np.int64)
            _kernels.weighted_fill(mesh.indptr, mesh.indices, mesh.cum, v, u, out)
            c = clock + np.cumsum(mesh.cost[out[:-1]])
            stop = np.searchsorted(c, t_end, side="left")
            if stop < c.size:
                nodes.append(out[1:stop + 2])
                clocks.append(c[:stop + 1])
                break
            nodes.append(out[1:])
            clocks.append(c)
            v = int(out[-1])
            clock = float(c[-1])
    return BMPath(mesh, np.concatenate(nodes), np.concatenate(clocks))


@dataclass(frozen=True)
class HittingSample:
    """Per-replica outcome of a run until one of several targets is hit.

    ``target`` is the index of the target hit, or ``-1`` when the clock limit
    came first.  ``functional`` is ``int L_hat dnu`` at the stopping step.
    """
    target: np.ndarray
    clock: np.ndarray
    functional: np.ndarray
    steps: np.ndarray

    def frequencies(self, n_targets: int) -> np.ndarray:
        return np.bincount(self.target[self.target >= 0], minlength=n_targets) / self.target.size


def sample_hitting(mesh: MeshGraph, start, targets, replicas: int, seed: int, nu: TreeMeasure | None = None,
                   t_max: float = np.inf, first_replica: int = 0) -> HittingSample:
    """Run independent mesh walks from ``start`` until a target node is reached.

    Replica ``i`` uses the stream keyed by ``(seed, first_replica + i)``.
    """
    starts = mesh.nearest_node(start)
    tgt = [mesh.nearest_node(p) for p in targets]
    if len(set(tgt)) != len(tgt):
        raise DomainError("targets must be distinct mesh nodes")
    stop = np.zeros(mesh.n_nodes, dtype=np.bool_)
    stop[tgt] = True
    lookup = np.full(mesh.n_nodes, -1, dtype=np.int64)
    lookup[tgt] = np.arange(len(tgt))
    cost = np.column_stack([mesh.cost, np.zeros(mesh.n_nodes) if nu is None else mesh.functional_weights(nu)])
    out_t = np.empty(replicas, dtype=np.int64)
    out_c = np.empty(replicas)
    out_f = np.empty(replicas)
    out_s = np.empty(replicas, dtype=np.int64)
    for i in range(replicas):
        rng = replica_rng(seed, first_replica + i)
        state = np.array([starts, 0.0, 0.0, 0.0])
        for u in _uniform_chunks(rng):
            if _kernels.weighted_until(mesh.indptr, mesh.indices, mesh.cum, cost, state, u, stop, t_max):
                break
        v = int(state[0])
        out_t[i] = lookup[v] if stop[v] else -1
        out_c[i], out_f[i], out_s[i] = state[1], state[2], int(state[3])
    return HittingSample(out_t, out_c, out_f, out_s)


# --------------------------------------------------------------------------
# exact oracles

def hitting_probability_exact(t: MetricTree, s, s1, s2) -> float:
    """Probability that the motion from ``s`` reaches ``s1`` before ``s2``.

    Equals ``d(b, s2) / d(s1, s2)`` with ``b`` the branch point of the three
    points; it does not depend on the speed measure.
    """
    d12 = t.distance(s1, s2)
    if d12 <= 0:
        raise DomainError("the two targets must be distinct")
    b = branch_point(t, s, s1, s2)
    return t.distance(b, s2) / d12


def _geodesic_offsets(t: MetricTree, e: int, s1: TreePoint, s2: TreePoint) -> list:
    out = []
    for p in (s1, s2):
        if p.edge == e:
            out.append(p.offset)
    return out


def mean_hitting_time_exact(t: MetricTree, mu: TreeMeasure, s1, s2) -> float:
    """Mean time to reach ``s2`` from ``s1`` for the motion with speed measure ``mu``.

    Computes ``2 * int d(b(x, s1, s2), s2) mu(dx)``.  On each edge the
    integrand is linear between the edge ends and the positions of ``s1`` and
    ``s2``, so the trapezoid rule on those pieces is exact.
    """
    s1, s2 = t.as_point(s1), t.as_point(s2)
    if t.distance(s1, s2) == 0:
        return 0.0

    def g(x):
        return t.distance(branch_point(t, x, s1, s2), s2)

    total = 0.0
    for loc, m in mu.atoms:
        if not isinstance(loc, TreePoint):
            raise DomainError("atoms of a metric-tree measure must be tree points")
        total += m * g(loc)
    for e, a, b, d in mu.pieces:
        if d == 0:
            continue
        cuts = sorted({a, b, *[x for x in _geodesic_offsets(t, e, s1, s2) if a < x < b]})
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            total += d * (hi - lo) * 0.5 * (g(t.point(e, lo)) + g(t.point(e, hi)))
    return 2.0 * total


# --------------------------------------------------------------------------
# local times and time change

class LocalTimeField:
    """Mesh local times ``L_hat_t(v) = (2 / sum_j 1/h_j) * #visits to v`` up to clock ``t``.

    With equal spacing the visit weight is ``h * 2 / deg``.  The visits
    counted at clock ``t`` are those at steps whose clock is ``<= t``.
    """

    def __init__(self, path: BMPath):
        self.path = path
        self.mesh = path.mesh

    def visits(self, t: float) -> np.ndarray:
        m = np.searchsorted(self.path.clock, t, side="right")
        return np.bincount(self.path.nodes[:m], minlength=self.mesh.n_nodes)

    def at(self, t: float) -> np.ndarray:
        return self.visits(t) * self.mesh.visit_weight

    def integrate(self, nu: TreeMeasure, t: float) -> float:
        """``int L_hat_t dnu``."""
        return float(self.visits(t) @ self.mesh.functional_weights(nu))

    def value(self, p, t: float) -> float:
        """Local time at a host point, linear between neighbouring mesh nodes."""
        mesh = self.mesh
        e, off = mesh.host.as_point(p)
        L = self.at(t)
        node = mesh.host.node_of(TreePoint(e, off))
        if node is not None:
            return float(L[node])
        g = mesh.edge_spacing[e]
        j = min(int(off // g), mesh.edge_nodes[e].size - 2)
        w = off / g - j
        ids = mesh.edge_nodes[e]
        return float((1 - w) * L[ids[j]] + w * L[ids[j + 1]])


def bm_time_changed(path: BMPath, nu: TreeMeasure) -> BMPath:
    """Re-index ``path`` by the inverse of ``A_hat = int L_hat dnu``.

    Steps during which ``A_hat`` does not grow are never occupied by the
    time-changed process and are dropped, so the new clock is strictly
    increasing.
    """
    if not nu.total_mass > 0:
        raise DomainError("speed measure has zero mass")
    w = path.mesh.functional_weights(nu)
    A = np.concatenate([[0.0], np.cumsum(w[path.nodes[:-1]])])
    keep = np.append(np.diff(A) > 0, True)
    return BMPath(path.mesh, path.nodes[keep], A[keep])


# --------------------------------------------------------------------------
# exit law at a branch point

def epsilon0(t: MetricTree) -> float:
    """Half the smallest distance between two nodes, which is half the shortest edge."""
    return 0.5 * t.shortest_edge


@dataclass(frozen=True)
class BranchConfig:
    eps1: float

    def validate(self, t: MetricTree) -> float:
        e0 = epsilon0(t)
        if not 0 < self.eps1 < e0:
            raise DomainError(f"eps1 must lie in (0, {e0}), got {self.eps1}")
        return self.eps1


def _spokes(t: MetricTree, b: int) -> list:
    out = [] if b == t.root else [int(t.parent[b])]
    return out + list(t.children[b])


def branch_exit_law(t: MetricTree, b: int, eps1, start_spoke: int = 0) -> np.ndarray:
    """Exit distribution from a point at distance ``eps1/2`` from node ``b``.

    The walk starts on spoke ``start_spoke`` and stops at the first point at
    distance ``eps1`` from ``b``; there is one such point per spoke.  Spokes
    are ordered parent first, then children.  With ``N`` spokes the start
    spoke gets ``(1 + N) / (2N)`` and every other spoke ``1 / (2N)``.
    """
    cfg = eps1 if isinstance(eps1, BranchConfig) else BranchConfig(float(eps1))
    cfg.validate(t)
    N = len(_spokes(t, int(b)))
    if not 0 <= start_spoke < N:
        raise DomainError("start spoke out of range")
    p = np.full(N, 1.0 / (2 * N))
    p[start_spoke] = (1.0 + N) / (2 * N)
    return p


def harmonic_exit_probabilities(n_nodes: int, edges, start: int, boundary) -> np.ndarray:
    """Exit distribution over ``boundary`` for the network walk from ``start``.

    ``edges`` holds ``(u, v, resistance)``; the result solves the discrete
    Dirichlet problem with conductances ``1 / resistance``.
    """
    boundary = list(boundary)
    W = np.zeros((n_nodes, n_nodes))
    for u, v, r in edges:
        W[u, v] += 1.0 / r
        W[v, u] += 1.0 / r
    Lap = np.diag(W.sum(1)) - W
    inner = [i for i in range(n_nodes) if i not in boundary]
    out = np.zeros(len(boundary))
    if start in boundary:
        out[boundary.index(start)] = 1.0
        return out
    k = inner.index(start)
    A = Lap[np.ix_(inner, inner)]
    for j, y in enumerate(boundary):
        rhs = W[inner, y]
        out[j] = np.linalg.solve(A, rhs)[k]
    return out


def branch_exit_electrical(t: MetricTree, b: int, eps1: float, start_spoke: int = 0) -> np.ndarray:
    """Network oracle for :func:`branch_exit_law`: nodes ``b``, the start, and one exit per spoke."""
    BranchConfig(float(eps1)).validate(t)
    N = len(_spokes(t, int(b)))
    # node 0 = b, node 1 = start, nodes 2.. = exits
    edges = [(0, 1, eps1 / 2), (1, 2 + start_spoke, eps1 / 2)]
    edges += [(0, 2 + j, eps1) for j in range(N) if j != start_spoke]
    return harmonic_exit_probabilities(N + 2, edges, 1, range(2, N + 2))


def sample_branch_exit(degree: int, trials: int, seed: int, resolution: int = 4, start_spoke: int = 0) -> np.ndarray:
    """Empirical exit frequencies of the mesh walk on a star of ``degree`` unit spokes.

    The walk starts at distance 1/2 on ``start_spoke`` and stops at a spoke
    tip; the mesh spacing is ``1 / (2 * resolution)``.
    """
    star = MetricTree.star([1.0] * degree)
    mesh = mesh_graph(star, 1.0 / (2 * resolution))
    tips = [star.node(i + 1) for i in range(degree)]
    res = sample_hitting(mesh, TreePoint(start_spoke + 1, 0.5), tips, trials, seed)
    return res.frequencies(degree)


# --------------------------------------------------------------------------
# oracle suite

@dataclass
class OracleCheck:
    name: str
    exact: float
    estimate: float
    tolerance: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(abs(self.estimate - self.exact) <= self.tolerance)


def check_oracles(t: MetricTree, seed: int, h: float | None = None, replicas: int = 10_000) -> list:
    """Hitting-probability and mean-hitting-time checks on ``t``.

    Uses the root and the first two designated leaves (or the two ends of a
    single-leaf tree).  Probabilities must agree within
    ``max(0.02, 4 SE)`` and mean times within 3 percent.
    """
    if t.n_nodes < 2:
        raise DomainError("oracle checks need a tree with at least one edge")
    h = min(0.01, t.shortest_edge) if h is None else h
    mesh = mesh_graph(t, h)
    leaves = list(t.leaves) or [int(t.preorder[-1])]
    root = t.node(t.root)
    s1 = t.node(leaves[0])
    s2 = t.node(leaves[1]) if len(leaves) > 1 else root
    start = root if len(leaves) > 1 else t.point_between(root, s1, 0.3 * t.distance(root, s1))
    lam = length_measure(t)
    checks = []
    p = hitting_probability_exact(t, start, s1, s2)
    res = sample_hitting(mesh, start, [s1, s2], replicas, seed)
    est = float(np.mean(res.target == 0))
    se = np.sqrt(p * (1 - p) / replicas)
    checks.append(OracleCheck("hitting-probability", p, est, max(0.02, 4 * se)))
    m = mean_hitting_time_exact(t, lam, root, s1)
    res = sample_hitting(mesh, root, [s1], replicas, seed, first_replica=replicas)
    checks.append(OracleCheck("mean-hitting-time", m, float(res.clock.mean()), 0.03 * m))
    return checks
