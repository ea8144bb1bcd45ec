import itertools
import math

import numpy as np
import pytest

from sbmlab.estimation import (EstimationFailure, count_cycles, default_cycle_length,
                               estimate_ssbm_2, trace_moment_estimates)
from sbmlab.graph import Graph, complete_graph, cycle_graph, disjoint_cliques
from sbmlab.model import SbmParams, sample_sbm

from helpers import random_graph


def subset_cycle_count(g, m):
    """m-cycles by enumerating vertex subsets and their cyclic orders."""
    adj = {(int(u), int(v)) for u, v in g.edge_array()}
    adj |= {(v, u) for u, v in adj}
    total = 0
    for subset in itertools.combinations(range(g.n), m):
        first, rest = subset[0], subset[1:]
        for order in itertools.permutations(rest):
            if order[0] > order[-1]:
                continue  # each cycle has two directions
            cyc = (first,) + order
            total += all((cyc[i], cyc[(i + 1) % m]) in adj for i in range(m))
    return total


def test_cycle_examples():
    assert count_cycles(complete_graph(3), 3) == 1
    assert count_cycles(complete_graph(4), 3) == 4
    c6 = cycle_graph(6)
    assert count_cycles(c6, 6) == 1
    assert [count_cycles(c6, m) for m in (3, 4, 5)] == [0, 0, 0]
    with pytest.raises(ValueError):
        count_cycles(c6, 2)


def test_cycles_match_subset_enumeration():
    for seed in range(12):
        n = 6 + seed % 7
        g = random_graph(n, 0.45, seed)
        for m in range(3, min(n, 7) + 1):
            assert count_cycles(g, m) == subset_cycle_count(g, m), (seed, m)


def test_nb_walk_mode_on_short_cycles():
    for seed in range(8):
        g = random_graph(10, 0.4, seed)
        for m in (3, 4, 5):
            assert count_cycles(g, m, "nb-closed-walk") == count_cycles(g, m)


def test_nb_walk_mode_on_disjoint_cycles():
    # vertex-disjoint cycles of lengths 6, 7, 8 joined by tree paths
    edges = [(i, (i + 1) % 6) for i in range(6)]
    edges += [(6 + i, 6 + (i + 1) % 7) for i in range(7)]
    edges += [(13 + i, 13 + (i + 1) % 8) for i in range(8)]
    edges += [(0, 21), (21, 6), (7, 22), (22, 13)]
    g = Graph.from_edges(23, edges)
    for m in (6, 7, 8):
        assert count_cycles(g, m) == 1
        assert count_cycles(g, m, "nb-closed-walk") == 1


def test_default_cycle_length():
    assert default_cycle_length(50_000) == 3
    assert default_cycle_length(10 ** 9) == 3


def test_trace_moments():
    assert trace_moment_estimates(Graph.from_edges(10, []), [3, 4]) == [(3, 0), (4, 0)]
    (m, value), = trace_moment_estimates(disjoint_cliques([4]), [3])
    assert (m, value) == (3, 24)


def _mean_trace_moment(params, seeds, n=50_000):
    values = np.array([trace_moment_estimates(sample_sbm(params, n, s)[1], [3])[0][1]
                       for s in seeds], dtype=float)
    return values.mean(), values.std(ddof=1) / math.sqrt(values.size)


@pytest.mark.slow
def test_trace_moment_first_moment_law():
    """Mean of 2 m C_m over 100 seeds within 3 standard errors of
    tr((diag(p) Q)^m) = 3^3 + 2^3."""
    mean, se = _mean_trace_moment(SbmParams.symmetric(2, 5, 1), range(100))
    assert abs(mean - 35) <= 3 * se
    assert abs(mean - 35) <= 6


def test_trace_moment_erdos_renyi():
    mean, se = _mean_trace_moment(SbmParams.symmetric(2, 4, 4), range(40))
    assert abs(mean - 64) <= 10


def test_estimate_ssbm():
    ok = 0
    for s in range(10):
        _, g = sample_sbm(SbmParams.symmetric(2, 5, 1), 50_000, s)
        try:
            est = estimate_ssbm_2(g, 3)
        except EstimationFailure:
            continue
        ok += abs(est.a_hat - 5) <= 0.5 and abs(est.b_hat - 1) <= 0.5
    assert ok >= 8


def test_estimate_disjoint_halves():
    ok = 0
    for s in range(10):
        _, g = sample_sbm(SbmParams.symmetric(2, 4, 0), 50_000, s)
        try:
            ok += abs(estimate_ssbm_2(g, 3).b_hat) <= 0.5
        except EstimationFailure:
            pass
    assert ok >= 8


def test_estimate_without_community_structure():
    """With a = b the cycle excess is noise: either a failure or a small f."""
    for s in range(5):
        _, g = sample_sbm(SbmParams.symmetric(2, 3, 3), 50_000, s)
        try:
            est = estimate_ssbm_2(g, 3)
        except EstimationFailure:
            continue
        assert est.f_hat < est.d_hat


def test_estimate_formula():
    # K4 ∪ isolated vertices: d = 12/n, C_3 = 4
    g = Graph.from_edges(20, [(u, v) for u in range(4) for v in range(u + 1, 4)])
    est = estimate_ssbm_2(g, 3)
    d = 12 / 20
    assert est.d_hat == pytest.approx(d)
    assert est.f_hat == pytest.approx((24 - d ** 3) ** (1 / 3))
    assert est.a_hat + est.b_hat == pytest.approx(2 * d)
    with pytest.raises(EstimationFailure):
        estimate_ssbm_2(cycle_graph(30), 3)
