"""Compiled inner loops.  Random numbers arrive as pre-drawn uniform arrays so
every kernel is a deterministic function of its inputs."""
import numpy as np
from numba import njit


@njit(cache=True)
def srw_fill(indptr, indices, start, u, out):
    """Simple random walk: ``out[0] = start`` and ``out[i+1]`` a uniform neighbour of ``out[i]``."""
    v = start
    out[0] = v
    for i in range(u.size):
        d = indptr[v + 1] - indptr[v]
        j = int(u[i] * d)
        if j >= d:
            j = d - 1
        v = indices[indptr[v] + j]
        out[i + 1] = v
    return v


@njit(cache=True)
def srw_advance(indptr, indices, start, u):
    """Position after ``u.size`` simple random walk steps."""
    v = start
    for i in range(u.size):
        d = indptr[v + 1] - indptr[v]
        j = int(u[i] * d)
        if j >= d:
            j = d - 1
        v = indices[indptr[v] + j]
    return v


@njit(cache=True)
def srw_record(indptr, indices, start, u, record_at, out):
    """Walk ``u.size`` steps from ``start``; ``out[j]`` is the position after ``record_at[j]`` steps.

    ``record_at`` must be sorted and lie in ``[0, u.size]``.
    """
    v = start
    j = 0
    while j < record_at.size and record_at[j] == 0:
        out[j] = v
        j += 1
    for i in range(u.size):
        d = indptr[v + 1] - indptr[v]
        k = int(u[i] * d)
        if k >= d:
            k = d - 1
        v = indices[indptr[v] + k]
        while j < record_at.size and record_at[j] == i + 1:
            out[j] = v
            j += 1
    return v


@njit(cache=True)
def _choose(indptr, cum, v, x):
    lo = indptr[v]
    hi = indptr[v + 1]
    for k in range(lo, hi - 1):
        if x < cum[k]:
            return k
    return hi - 1


@njit(cache=True)
def weighted_until(indptr, indices, cum, cost, state, u, stop, t_end):
    """Weighted walk with per-visit clock costs, run until a stop node or a time limit.

    ``state`` is ``[node, clock, extra_clock, steps]`` as float64 and is updated in
    place.  ``cost`` has two columns: the base clock increment and a secondary
    increment (an additive functional) paid on leaving each node.  Returns 1 when
    the walk stopped (stop node reached or clock >= t_end) and 0 when ``u`` ran out.
    """
    v = int(state[0])
    clock = state[1]
    extra = state[2]
    steps = state[3]
    used = 0
    done = 0
    while True:
        if stop[v] or clock >= t_end:
            done = 1
            break
        if used >= u.size:
            break
        clock += cost[v, 0]
        extra += cost[v, 1]
        k = _choose(indptr, cum, v, u[used])
        used += 1
        v = indices[k]
        steps += 1.0
    state[0] = v
    state[1] = clock
    state[2] = extra
    state[3] = steps
    return done


@njit(cache=True)
def weighted_fill(indptr, indices, cum, start, u, out):
    """Weighted walk path: ``out[0] = start``, then one step per uniform."""
    v = start
    out[0] = v
    for i in range(u.size):
        k = _choose(indptr, cum, v, u[i])
        v = indices[k]
        out[i + 1] = v
    return v


@njit(cache=True)
def ball_counts(indptr, indices, weights, radii):
    """For each vertex and radius, total weight of vertices at graph distance < radius.

    Returns an ``(n, len(radii))`` array.  ``radii`` must be increasing.
    """
    n = indptr.size - 1
    nr = radii.size
    out = np.zeros((n, nr))
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    rmax = radii[nr - 1]
    for s in range(n):
        head = 0
        tail = 1
        queue[0] = s
        dist[s] = 0
        while head < tail:
            u = queue[head]
            head += 1
            du = dist[u]
            if du + 1 >= rmax:
                continue
            for k in range(indptr[u], indptr[u + 1]):
                w = indices[k]
                if dist[w] < 0:
                    dist[w] = du + 1
                    queue[tail] = w
                    tail += 1
        # accumulate weight by distance shell, then cumulate over radii
        for i in range(tail):
            u = queue[i]
            du = dist[u]
            for r in range(nr):
                if du < radii[r]:
                    out[s, r] += weights[u]
            dist[u] = -1
    return out


@njit(cache=True)
def weighted_record(indptr, indices, cum, cost, state, u, times, out, tol):
    """Record the node occupied at each clock time in ``times`` (sorted).

    A node is occupied at time ``s`` from its arrival clock until the clock
    reaches ``s``, so the walk only steps while ``clock + cost[v] <= s``.
    ``state`` is ``[node, clock, next_index]`` and is updated in place.
    Returns 1 once every time is recorded and 0 when ``u`` ran out.
    """
    v = int(state[0])
    clock = state[1]
    j = int(state[2])
    used = 0
    done = 0
    while True:
        while j < times.size and clock + cost[v] > times[j] * (1.0 + tol):
            out[j] = v
            j += 1
        if j >= times.size:
            done = 1
            break
        if used >= u.size:
            break
        clock += cost[v]
        k = _choose(indptr, cum, v, u[used])
        used += 1
        v = indices[k]
    state[0] = v
    state[1] = clock
    state[2] = j
    return done
