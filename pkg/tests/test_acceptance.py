"""Acceptance criteria, one test each, at their full sizes and tolerances.

Every test prints a single ``PASS``/``FAIL`` line through the capture so the
verdicts appear in the pytest log even when output is captured.
"""
import time
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from conftest import random_metric_tree, random_ordered_tree
from dendrite.bm import (
    branch_exit_electrical,
    branch_exit_law,
    hitting_probability_exact,
    mean_hitting_time_exact,
    mesh_graph,
    run_bm,
    sample_branch_exit,
    sample_hitting,
    LocalTimeField,
)
from dendrite.diagnostics import convergence_experiment, exponent_fit, gw_volume_profile
from dendrite.embedding import embed, pi_k
from dendrite.excursions import grid_sample, search_depth, tree_from_excursion
from dendrite.gw import (
    OffspringDistribution,
    enumerate_trees,
    sample_conditioned_offspring,
    scaling_sequence,
    shape_probabilities,
)
from dendrite.streams import replica_rng
from dendrite.trees import (
    MetricTree,
    TreeMeasure,
    TreePoint,
    length_measure,
    pushforward_measure,
    spanning_subtree,
    uniform_vertex_measure,
)
from dendrite.walks import (
    additive_functional_discrete,
    local_times_discrete,
    observe_on_subtree,
    run_srw,
)

SEED = 20261017
pytestmark = pytest.mark.slow


@pytest.fixture
def verdict(capsys):
    def report(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number} ({title}): {detail}")
        assert ok, detail
    return report


def test_criterion_01_hitting_probability(verdict):
    t0 = time.perf_counter()
    seg = MetricTree.segment(1.0)
    f_seg = sample_hitting(mesh_graph(seg, 0.01), TreePoint(1, 0.3), [0, 1], 10_000, SEED).frequencies(2)[0]
    y = MetricTree.star([1.0, 2.0, 3.0])
    f_y = sample_hitting(mesh_graph(y, 0.01), 0, [1, 2], 10_000, SEED + 1).frequencies(2)[0]
    exact_seg = hitting_probability_exact(seg, TreePoint(1, 0.3), 0, 1)
    exact_y = hitting_probability_exact(y, 0, 1, 2)
    elapsed = time.perf_counter() - t0
    ok = (exact_seg == pytest.approx(0.7) and exact_y == pytest.approx(2 / 3)
          and abs(f_seg - exact_seg) <= 0.02 and abs(f_y - exact_y) <= 0.02 and elapsed < 120)
    verdict(1, "hitting probabilities", ok,
            f"segment {f_seg:.4f} vs {exact_seg:.4f}, Y(1,2,3) {f_y:.4f} vs {exact_y:.4f}, {elapsed:.1f}s")


def test_criterion_02_mean_occupation(verdict):
    t0 = time.perf_counter()
    seg = MetricTree.segment(1.0)
    y = MetricTree.star([1.0, 1.0, 1.0])
    nu = TreeMeasure(pieces=[(1, 0.0, 0.5, 2.0)])
    cases = [
        ("segment", mean_hitting_time_exact(seg, length_measure(seg), 0, 1), 1.0,
         sample_hitting(mesh_graph(seg, 0.01), 0, [1], 10_000, SEED + 2).clock.mean()),
        ("Y(1,1,1)", mean_hitting_time_exact(y, length_measure(y), 0, 1), 5 / 3,
         sample_hitting(mesh_graph(y, 0.01), 0, [1], 10_000, SEED + 3).clock.mean()),
        ("changed segment", mean_hitting_time_exact(seg, nu, 0, 1), 1.5,
         sample_hitting(mesh_graph(seg, 0.01), 0, [1], 10_000, SEED + 4, nu=nu).functional.mean()),
    ]
    elapsed = time.perf_counter() - t0
    ok = elapsed < 300
    parts = []
    for name, exact, stated, est in cases:
        ok &= exact == pytest.approx(stated) and abs(est - exact) <= 0.03 * exact
        parts.append(f"{name} {est:.4f} vs {exact:.4f}")
    verdict(2, "mean occupation", ok, ", ".join(parts) + f", {elapsed:.1f}s")


def test_criterion_03_branch_exit(verdict):
    worst = 0.0
    for degree in range(2, 7):
        t = MetricTree.star(list(np.linspace(0.6, 2.5, degree)))
        for s in range(degree):
            worst = max(worst, np.abs(branch_exit_law(t, 0, 0.25, s) - branch_exit_electrical(t, 0, 0.25, s)).max())
    trials = 100_000
    freq = sample_branch_exit(3, trials, SEED + 5)
    p = np.array([2 / 3, 1 / 6, 1 / 6])
    se = np.sqrt(p * (1 - p) / trials)
    ok = worst <= 1e-12 and bool(np.all(np.abs(freq - p) <= 4 * se))
    verdict(3, "branch exit law", ok,
            f"max table/network gap {worst:.1e}, mesh frequencies {np.round(freq, 4).tolist()}")


def test_criterion_04_occupation_identity(verdict):
    h = 0.01
    worst = 0.0
    for i, t in enumerate([MetricTree.segment(1.0), MetricTree.star([1.0, 2.0, 3.0])]):
        L = LocalTimeField(run_bm(t, h, 1.0, t.node(t.root), replica_rng(SEED, 100 + i)))
        lam = length_measure(t)
        for s in (0.25, 0.5, 1.0):
            worst = max(worst, abs(L.integrate(lam, s) - s))
    verdict(4, "occupation/clock identity", worst <= 5 * h, f"max |int L dlambda - t| = {worst:.2e} (limit {5 * h})")


def test_criterion_05_conditioned_gw(verdict):
    samples = 100_000
    worst_p = 1.0
    parts = []
    exact3 = shape_probabilities(OffspringDistribution("geometric-half"), 3)
    uniform3 = sorted(exact3.values()) == pytest.approx([0.5, 0.5], abs=1e-15)
    for j, kind in enumerate(("geometric-half", "poisson-1")):
        dist = OffspringDistribution(kind)
        for n in range(1, 6):
            probs = shape_probabilities(dist, n)
            # one independent stream per (distribution, size) cell
            rows = sample_conditioned_offspring(dist, n, samples, replica_rng(SEED, 200 + 10 * j + n))
            counts = Counter(map(tuple, rows.tolist()))
            assert set(counts) <= set(probs)
            if len(probs) == 1:
                continue
            keys = sorted(probs)
            obs = np.array([counts.get(k, 0) for k in keys])
            exp = samples * np.array([probs[k] for k in keys])
            p = stats.chisquare(obs, exp).pvalue
            worst_p = min(worst_p, p)
            parts.append(f"{kind} n={n} p={p:.3f}")
    verdict(5, "conditioned GW exactness", worst_p > 0.01 and uniform3,
            "; ".join(parts) + f"; n=3 geometric exact {sorted(exact3.values())}")


def test_criterion_06_embedding(verdict):
    rng = np.random.default_rng(SEED)
    worst_iso = worst_proj = worst_scale = 0.0
    alpha_n = scaling_sequence(OffspringDistribution("stable-tail"), 1000).alpha_n
    trees = 0
    while trees < 100:
        t = random_metric_tree(rng, int(rng.integers(2, 16)))
        if len(t.leaves) > 10:
            continue
        trees += 1
        t = t.with_leaves(list(rng.permutation(t.leaves)))
        psi = embed(t)
        pts = [t.random_point(rng) for _ in range(8)] + [t.node(v) for v in range(t.n_nodes)]
        X = psi.points(pts)
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                worst_iso = max(worst_iso, abs(np.abs(X[i] - X[j]).sum() - t.distance(pts[i], pts[j])))
        for k in range(1, len(t.leaves) + 1):
            sub = spanning_subtree(t, t.leaves[:k])
            for p, x in zip(pts, X):
                worst_proj = max(worst_proj, np.abs(pi_k(x, k) - psi(sub.project(p))).max())
        scaled = embed(t.rescale(1 / alpha_n)).node_coords
        worst_scale = max(worst_scale, np.abs(scaled - psi.node_coords / alpha_n).max())
    ok = worst_iso <= 1e-9 and worst_proj <= 1e-9 and worst_scale <= 1e-12
    verdict(6, "embedding isometry and projection", ok,
            f"isometry {worst_iso:.1e}, projection {worst_proj:.1e}, rescaling {worst_scale:.1e} over 100 trees")


def test_criterion_07_search_depth_round_trip(verdict):
    worst = 0.0
    count = 0
    for n in range(1, 10):
        for t in enumerate_trees(n):
            m = tree_from_excursion(search_depth(t), grid_sample(t))
            verts = list(t.preorder)
            nodes = list(m.leaves)
            for i, v in enumerate(verts):
                dg = t.distances_from(v)[verts]
                dm = m.distances_from(nodes[i])[nodes]
                worst = max(worst, np.abs(dg - dm).max())
            count += 1
    verdict(7, "search-depth round trip", worst <= 1e-9,
            f"{count} ordered trees with n <= 9, max distance error {worst:.1e}")


def test_criterion_08_ball_volume_exponent(verdict):
    t0 = time.perf_counter()
    stable = exponent_fit(gw_volume_profile(OffspringDistribution("stable-tail", alpha=1.5), 5000, 20, SEED)).slope
    geom = exponent_fit(gw_volume_profile(OffspringDistribution("geometric-half"), 5000, 20, SEED + 1)).slope
    elapsed = time.perf_counter() - t0
    ok = 2.5 <= stable <= 3.5 and 1.6 <= geom <= 2.4 and elapsed < 900
    verdict(8, "ball-volume exponent", ok, f"stable slope {stable:.3f} in [2.5, 3.5], "
            f"geometric slope {geom:.3f} in [1.6, 2.4], {elapsed:.1f}s")


def test_criterion_09_fixed_tree_convergence(verdict):
    rep = convergence_experiment({"mode": "fixed-tree", "seed": SEED, "replicas": 10_000, "tree": "star:1,1,1",
                                  "scales": [50, 200], "times": [0.5], "hitting": False, "workers": 4})
    ks = {r["series"]: r["ks"] for r in rep.document["ks-reference"]}
    ok = all(v < 0.05 for v in ks.values()) and set(ks) == {"m=50", "m=200"}
    verdict(9, "fixed-tree convergence", ok, ", ".join(f"{k} KS {v:.4f}" for k, v in ks.items()) + " (limit 0.05)")


def test_criterion_10_time_change_identities(verdict):
    rng = np.random.default_rng(SEED)
    bad_reconstruct = bad_monotone = 0
    for case in range(1000):
        t = random_ordered_tree(rng, int(rng.integers(2, 60)))
        sub = spanning_subtree(t, rng.integers(0, t.n, size=int(rng.integers(1, 5))))
        x = run_srw(t, int(rng.integers(1, 400)), replica_rng(SEED, 300 + case))
        obs = observe_on_subtree(x, sub)
        if not np.array_equal(obs.reconstruct(), sub.projection[x.vertices]):
            bad_reconstruct += 1
        if sub.n_vertices < 2:
            continue
        mu = pushforward_measure(uniform_vertex_measure(t), t, sub)
        full = all(m > 0 for _, m in mu.atoms) and len(mu.atoms) == sub.n_vertices
        A = additive_functional_discrete(local_times_discrete(obs), mu, t.n)
        if full and not np.all(np.diff(A) > 0):
            bad_monotone += 1
    verdict(10, "discrete time-change identities", bad_reconstruct == 0 and bad_monotone == 0,
            f"1000 cases, {bad_reconstruct} reconstruction failures, {bad_monotone} monotonicity failures")
