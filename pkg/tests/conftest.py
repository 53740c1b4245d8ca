import numpy as np
import pytest

from keynode import graph


@pytest.fixture
def path3():
    """Directed path 0 -> 1 -> 2."""
    return graph.from_edges([(0, 1), (1, 2)], n=3, directed=True)


@pytest.fixture
def path4_undirected():
    return graph.from_edges([(0, 1), (1, 2), (2, 3)], n=4, directed=False)


@pytest.fixture
def triangle():
    return graph.from_edges([(0, 1), (1, 2), (0, 2)], n=3, directed=False)


@pytest.fixture
def star6():
    """Center 0 with arcs to five leaves."""
    return graph.from_edges([(0, i) for i in range(1, 6)], n=6, directed=True)


def random_digraph(n, arc_prob, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    edges = [
        (u, v)
        for u in range(n)
        for v in range(n)
        if u != v and rng.random() < arc_prob
    ]
    return graph.from_edges(edges, n=n, directed=True)
