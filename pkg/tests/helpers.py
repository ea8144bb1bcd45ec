"""Shared fixtures and small oracles for the test suite."""

import itertools

import numpy as np

from sbmlab.graph import Graph, disjoint_cliques


def random_graph(n, p, seed):
    rng = np.random.default_rng(seed)
    return Graph.from_edges(n, [(u, v) for u, v in itertools.combinations(range(n), 2)
                                if rng.random() < p])


def two_cliques(size=10):
    """Two disjoint cliques joined by a single edge, and their labeling."""
    g = disjoint_cliques([size, size], bridges=[(0, size)])
    return g, np.repeat([1, 2], size)


def nb_states(g, r):
    """All directed paths on r distinct vertices (the r-NB states)."""
    out = []

    def extend(seq):
        if len(seq) == r:
            out.append(tuple(seq))
            return
        for w in g.neighbors(seq[-1]):
            if int(w) not in seq:
                extend(seq + [int(w)])

    for v in range(g.n):
        extend([v])
    return out


def random_regular(n, d, seed):
    import networkx as nx
    h = nx.random_regular_graph(d, n, seed=seed)
    return Graph.from_edges(n, np.array(h.edges(), dtype=np.int64))
