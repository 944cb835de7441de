import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ordered_trees, random_ordered_tree
from dendrite.exceptions import DomainError
from dendrite.streams import replica_rng
from dendrite.trees import GraphSubtree, OrderedTree, TreeMeasure, pushforward_measure, spanning_subtree, uniform_vertex_measure
from dendrite.walks import (
    WalkPath,
    additive_functional_discrete,
    functional_to_csv,
    local_times_discrete,
    max_projection_gap,
    observe_on_subtree,
    rescaled_subtree_length,
    run_srw,
    time_changed_walk,
)

PATH3 = OrderedTree.path(3)  # rho=0, a=1, b=2


def fixed_walk(t, vertices):
    return WalkPath(t, np.array(vertices, dtype=np.int64))


class TestRunSRW:
    def test_two_vertex_alternates(self):
        t = OrderedTree.path(2)
        x = run_srw(t, 9, replica_rng(1))
        assert list(x.vertices) == [0, 1] * 5

    def test_deterministic(self):
        t = OrderedTree.star(4)
        a = run_srw(t, 1000, replica_rng(3, 1)).vertices
        b = run_srw(t, 1000, replica_rng(3, 1)).vertices
        assert np.array_equal(a, b)

    def test_steps_are_edges(self, rng):
        t = random_ordered_tree(rng, 50)
        x = run_srw(t, 5000, replica_rng(2)).vertices
        assert x[0] == t.root
        par = t.parent
        assert np.all((par[x[1:]] == x[:-1]) | (par[x[:-1]] == x[1:]))

    def test_stationary_occupation(self):
        x = run_srw(PATH3, 10**6, replica_rng(4)).vertices
        freq = np.bincount(x[1:], minlength=3) / 10**6
        exact = np.array([1, 2, 1]) / 4
        # consecutive visits are dependent; a loose block estimate of the spread
        blocks = np.array([np.bincount(b, minlength=3) / b.size for b in np.split(x[1:], 100)])
        se = blocks.std(axis=0) / np.sqrt(100)
        assert np.all(np.abs(freq - exact) < 4 * se + 1e-4)

    def test_uniform_neighbour_choice(self):
        t = OrderedTree.star(3)
        x = run_srw(t, 60_000, replica_rng(5)).vertices
        from_root = x[1::2]
        freq = np.bincount(from_root, minlength=4)[1:] / from_root.size
        assert np.all(np.abs(freq - 1 / 3) < 4 * np.sqrt(2 / 9 / from_root.size))

    def test_u32_round_trip(self):
        x = run_srw(PATH3, 20, replica_rng(6))
        assert np.array_equal(WalkPath.from_u32(PATH3, x.to_u32()).vertices, x.vertices)
        assert x.to_csv().splitlines()[0] == "m,vertex"


class TestObserve:
    def test_whole_tree(self):
        x = run_srw(PATH3, 30, replica_rng(7))
        obs = observe_on_subtree(x, GraphSubtree.from_vertices(PATH3, [0, 1, 2]))
        assert np.array_equal(obs.J, x.vertices)
        assert np.array_equal(obs.A, np.arange(31))

    def test_hand_projection(self):
        x = fixed_walk(PATH3, [0, 1, 2, 1, 0])
        obs = observe_on_subtree(x, GraphSubtree.from_vertices(PATH3, [0, 1]))
        assert list(obs.J) == [0, 1, 0]
        assert list(obs.A) == [0, 1, 4]
        assert list(obs.reconstruct()) == [0, 1, 1, 1, 0]

    def test_foreign_subtree(self):
        x = fixed_walk(PATH3, [0, 1])
        with pytest.raises(DomainError):
            observe_on_subtree(x, GraphSubtree.from_vertices(OrderedTree.path(3), [0, 1]))

    @settings(max_examples=40)
    @given(ordered_trees(max_n=25), st.integers(0, 2**32), st.data())
    def test_reconstruction_identity(self, t, seed, data):
        if t.n < 2:
            return
        k = data.draw(st.integers(1, 3))
        targets = [data.draw(st.integers(0, t.n - 1)) for _ in range(k)]
        sub = spanning_subtree(t, targets)
        x = run_srw(t, 300, replica_rng(seed))
        obs = observe_on_subtree(x, sub)
        assert np.array_equal(obs.reconstruct(), sub.projection[x.vertices])
        assert np.all(obs.J[1:] != obs.J[:-1])
        assert np.all(np.diff(obs.A) > 0)


class TestLocalTimes:
    def full(self, t):
        return GraphSubtree.from_vertices(t, range(t.n))

    def test_first_visit(self):
        obs = observe_on_subtree(fixed_walk(PATH3, [0, 1, 2]), self.full(PATH3))
        L = local_times_discrete(obs)
        assert L.at(0, 0) == 2.0 / 1

    def test_hand_value(self):
        obs = observe_on_subtree(fixed_walk(PATH3, [0, 1, 2, 1, 0]), self.full(PATH3))
        L = local_times_discrete(obs)
        assert L.at(4, 1) == pytest.approx(2.0)
        assert L.table(4) == {0: 4.0, 1: 2.0, 2: 2.0}

    def test_visit_count_identity(self, rng):
        t = random_ordered_tree(rng, 40)
        sub = spanning_subtree(t, [5, 17, 33])
        obs = observe_on_subtree(run_srw(t, 20_000, replica_rng(8)), sub)
        L = local_times_discrete(obs, checkpoint=256)
        for m in (0, 1, 255, 256, 257, 1000, obs.J.size - 1):
            tab = L.table(m)
            total = sum(sub.deg_sub[v] / 2 * val for v, val in tab.items())
            assert total == pytest.approx(m + 1)

    def test_checkpoints_agree_with_direct_count(self, rng):
        t = random_ordered_tree(rng, 30)
        sub = spanning_subtree(t, [3, 29])
        obs = observe_on_subtree(run_srw(t, 5000, replica_rng(9)), sub)
        L = local_times_discrete(obs, checkpoint=64)
        for m in (0, 63, 64, 65, 500, obs.J.size - 1):
            direct = np.bincount(obs.J[:m + 1], minlength=t.n) * 2.0 / np.maximum(sub.deg_sub, 1)
            assert np.allclose(L.dense(m), direct)

    def test_non_decreasing(self, rng):
        t = random_ordered_tree(rng, 20)
        sub = spanning_subtree(t, [19])
        obs = observe_on_subtree(run_srw(t, 2000, replica_rng(10)), sub)
        L = local_times_discrete(obs, checkpoint=32)
        prev = np.zeros(t.n)
        for m in range(0, obs.J.size, 7):
            cur = L.dense(m)
            assert np.all(cur >= prev)
            prev = cur


class TestAdditiveFunctional:
    def test_hand_value(self):
        sub = GraphSubtree.from_vertices(PATH3, [0, 1, 2])
        obs = observe_on_subtree(fixed_walk(PATH3, [0, 1, 2]), sub)
        A = additive_functional_discrete(local_times_discrete(obs), uniform_vertex_measure(PATH3), 3)
        assert A[0] == 0
        assert A[2] == pytest.approx(3.0)

    def test_matches_integral(self, rng):
        t = random_ordered_tree(rng, 30)
        sub = spanning_subtree(t, [7, 22])
        mu = pushforward_measure(uniform_vertex_measure(t), t, sub)
        obs = observe_on_subtree(run_srw(t, 3000, replica_rng(11)), sub)
        L = local_times_discrete(obs, checkpoint=128)
        A = additive_functional_discrete(L, mu, t.n)
        masses = dict(mu.atoms)
        for m in (1, 2, 50, 129, obs.J.size - 1):
            direct = t.n * sum(val * masses.get(v, 0.0) for v, val in L.table(m - 1).items())
            assert A[m] == pytest.approx(direct)

    def test_off_subtree_measure(self):
        sub = GraphSubtree.from_vertices(PATH3, [0, 1])
        obs = observe_on_subtree(fixed_walk(PATH3, [0, 1, 2]), sub)
        with pytest.raises(DomainError):
            additive_functional_discrete(local_times_discrete(obs), uniform_vertex_measure(PATH3), 3)

    def test_strictly_increasing_with_full_support(self, rng):
        t = random_ordered_tree(rng, 25)
        sub = spanning_subtree(t, [24, 12])
        mu = pushforward_measure(uniform_vertex_measure(t), t, sub)
        obs = observe_on_subtree(run_srw(t, 4000, replica_rng(12)), sub)
        A = additive_functional_discrete(local_times_discrete(obs), mu, t.n)
        if all(v in dict(mu.atoms) for v in sub.vertices):
            assert np.all(np.diff(A) > 0)

    def test_csv(self):
        assert functional_to_csv([0.0, 1.5]).splitlines() == ["m,A_hat", "0,0.0", "1,1.5"]


class TestTimeChange:
    def test_identity_clock(self):
        sub = GraphSubtree.from_vertices(PATH3, [0, 1, 2])
        obs = observe_on_subtree(fixed_walk(PATH3, [0, 1, 2, 1]), sub)
        assert list(time_changed_walk(obs, [0.0, 1.0, 2.0, 3.0])) == [0, 1, 2, 1]

    def test_hand_value(self):
        sub = GraphSubtree.from_vertices(PATH3, [0, 1])
        obs = observe_on_subtree(fixed_walk(PATH3, [0, 1, 0]), sub)
        xh = time_changed_walk(obs, [0.0, 3.0, 5.0])
        assert list(xh[:5]) == [0, 0, 0, 1, 1]
        assert xh.size == 6

    def test_bad_clock(self):
        sub = GraphSubtree.from_vertices(PATH3, [0, 1])
        obs = observe_on_subtree(fixed_walk(PATH3, [0, 1, 0]), sub)
        with pytest.raises(DomainError):
            time_changed_walk(obs, [0.0, 3.0, 2.0])

    @settings(max_examples=30)
    @given(st.lists(st.floats(0, 5), min_size=1, max_size=30))
    def test_tau_hat_right_continuous_step(self, incs):
        A = np.concatenate([[0.0], np.cumsum(incs)])
        J = np.arange(A.size) % 2
        obs_like = type("O", (), {"J": J})
        xh = time_changed_walk(obs_like, A)
        tau = np.searchsorted(A, np.arange(xh.size), side="right") - 1
        assert np.all(np.diff(tau) >= 0)
        assert np.all(A[tau] <= np.arange(xh.size))
        assert np.array_equal(xh, J[tau])


class TestSummaries:
    def test_subtree_length_and_gap(self):
        t = OrderedTree([[1, 4], [2, 3], [], [], [5], []])
        sub = spanning_subtree(t, [3])
        assert rescaled_subtree_length(sub, 2.0) == pytest.approx(1.0)
        assert max_projection_gap(sub) == 2

    def test_gap_non_increasing(self, rng):
        t = random_ordered_tree(rng, 200)
        leaves = [v for v in range(t.n) if not t.children[v]]
        gaps = [max_projection_gap(spanning_subtree(t, leaves[:k])) for k in range(1, len(leaves) + 1)]
        assert all(b <= a for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] == 0
