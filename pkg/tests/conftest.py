import numpy as np
import pytest
from hypothesis import strategies as st

from dendrite.trees import MetricTree, OrderedTree


def random_parents(rng, n):
    """Uniform recursive tree parent array; vertex v attaches to a vertex below v."""
    return [-1] + [int(rng.integers(0, v)) for v in range(1, n)]


def random_metric_tree(rng, n_nodes, lo=0.1, hi=2.0):
    parents = random_parents(rng, n_nodes)
    lengths = rng.uniform(lo, hi, size=n_nodes)
    return MetricTree(parents, lengths)


def random_ordered_tree(rng, n):
    return OrderedTree.from_parents(random_parents(rng, n))


@st.composite
def metric_trees(draw, max_nodes=12):
    n = draw(st.integers(2, max_nodes))
    parents = [-1] + [draw(st.integers(0, v - 1)) for v in range(1, n)]
    lengths = [0.0] + [draw(st.floats(0.05, 3.0)) for _ in range(1, n)]
    return MetricTree(parents, lengths)


@st.composite
def ordered_trees(draw, max_n=30):
    n = draw(st.integers(1, max_n))
    parents = [-1] + [draw(st.integers(0, v - 1)) for v in range(1, n)]
    return OrderedTree.from_parents(parents)


@st.composite
def tree_points(draw, t):
    edges = [v for v in range(t.n_nodes) if v != t.root]
    e = draw(st.sampled_from(edges))
    frac = draw(st.floats(0.0, 1.0))
    return t.point(e, frac * t.length[e])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def y123():
    """Star rooted at its centre with arms 1, 2, 3 ending at nodes 1, 2, 3."""
    return MetricTree.star([1.0, 2.0, 3.0])


@pytest.fixture
def y111():
    return MetricTree.star([1.0, 1.0, 1.0])


@pytest.fixture
def unit_segment():
    return MetricTree.segment(1.0)
