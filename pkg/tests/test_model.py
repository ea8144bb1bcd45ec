import math

import numpy as np
import pytest
from scipy import stats

from sbmlab.graph import Graph, complete_graph, star_graph
from sbmlab.model import (FitError, ParameterError, SbmParams, degree_profile, degree_profiles,
                          fit_block_matrix, graph_split, load_params, parse_ssbm, sample_sbm,
                          save_params)


def test_params_validation():
    with pytest.raises(ParameterError):
        SbmParams([0.5, 0.6], [[1, 0], [0, 1]])
    with pytest.raises(ParameterError):
        SbmParams([0.5, 0.5], [[1, 2], [0, 1]])
    with pytest.raises(ParameterError):
        SbmParams([0.5, 0.5], [[1, -1], [-1, 1]])
    with pytest.raises(ParameterError):
        SbmParams([1.0], [[1.5]], "explicit")
    with pytest.raises(ParameterError):
        SbmParams([1.0], [[1.0]], "quadratic")


def test_params_file_round_trip(tmp_path):
    p = SbmParams([0.48, 0.52], [[22.56, 2.25], [2.25, 20.56]], "logarithmic")
    save_params(p, tmp_path / "p.json")
    q = load_params(tmp_path / "p.json")
    np.testing.assert_array_equal(q.p, p.p)
    np.testing.assert_array_equal(q.q, p.q)
    assert q.regime == "logarithmic"
    assert parse_ssbm("3,5,1").k == 3
    with pytest.raises(ParameterError):
        parse_ssbm("3,5")


def test_logarithmic_out_of_range():
    with pytest.raises(ParameterError):
        sample_sbm(SbmParams.symmetric(2, 50, 1, "logarithmic"), 20, 0)


def test_sampling_is_deterministic():
    p = SbmParams.symmetric(2, 5, 1)
    x1, g1 = sample_sbm(p, 2000, 7)
    x2, g2 = sample_sbm(p, 2000, 7)
    np.testing.assert_array_equal(x1, x2)
    assert g1 == g2
    assert sample_sbm(p, 2000, 8)[1] != g1


def test_er_edge_count_within_three_sigma():
    n, c = 400, 3.0
    params = SbmParams.symmetric(2, c, c)
    counts = [sample_sbm(params, n, s)[1].num_edges for s in range(50)]
    pairs = n * (n - 1) / 2
    mean, sd = pairs * c / n, math.sqrt(pairs * c / n * (1 - c / n))
    assert abs(np.mean(counts) - mean) <= 3 * sd / math.sqrt(50)


def test_ssbm_average_degree():
    x, g = sample_sbm(SbmParams.symmetric(2, 5, 1), 10_000, 3)
    assert abs(g.average_degree() - 3) <= 0.2


def test_single_community_is_er():
    params = SbmParams([1.0], [[4.0]])
    x, g = sample_sbm(params, 5000, 0)
    assert (x == 1).all()
    assert abs(g.average_degree() - 4) <= 0.2


def test_label_frequencies_chi_square():
    params = SbmParams([0.2, 0.3, 0.5], np.ones((3, 3)))
    counts = np.zeros(3)
    for s in range(100):
        x, _ = sample_sbm(params, 200, s)
        counts += np.bincount(x - 1, minlength=3)
    assert stats.chisquare(counts, counts.sum() * params.p).pvalue > 0.01


def test_balanced_sampling_sizes():
    x, _ = sample_sbm(SbmParams([0.3, 0.7], np.ones((2, 2))), 101, 0, balanced=True)
    assert np.bincount(x)[1:].tolist() == [30, 71]


def test_graph_split_partitions_edges():
    _, g = sample_sbm(SbmParams.symmetric(2, 5, 1), 6000, 0)
    s = graph_split(g, 0.3, 1)
    e1 = {tuple(e) for e in s.g1.edge_array()}
    e2 = {tuple(e) for e in s.g2.edge_array()}
    assert not e1 & e2
    assert e1 | e2 == {tuple(e) for e in g.edge_array()}
    assert graph_split(g, 0.0, 1).g2 == g and graph_split(g, 0.0, 1).g1.num_edges == 0
    assert graph_split(g, 1.0, 1).g1 == g and graph_split(g, 1.0, 1).g2.num_edges == 0
    with pytest.raises(ParameterError):
        graph_split(g, 1.5, 0)


def test_graph_split_binomial_size():
    _, g = sample_sbm(SbmParams.symmetric(2, 8, 8), 2500, 2)
    m = g.num_edges
    for seed in range(5):
        got = graph_split(g, 0.3, seed).g1.num_edges
        assert abs(got - 0.3 * m) <= 3 * math.sqrt(m * 0.21)


def test_degree_profile_examples():
    g = Graph.from_edges(4, [(0, 1), (1, 2), (0, 2)])
    x = np.array([1, 1, 2, 1])
    assert degree_profile(g, x, 3, 2).tolist() == [0, 0]
    assert degree_profile(g, x, 2, 2).tolist() == [2, 0]
    star = star_graph(5)
    assert degree_profile(star, np.array([1, 1, 1, 1, 2, 2]), 0, 2).tolist() == [3, 2]
    prof = degree_profiles(g, x, 2)
    np.testing.assert_array_equal(prof.sum(axis=1), g.degrees)


def test_fit_block_matrix_concentrates():
    good = 0
    for seed in range(10):
        x, g = sample_sbm(SbmParams.symmetric(2, 5, 1), 50_000, seed)
        q = fit_block_matrix(g, x).q
        good += bool((np.abs(q - [[5, 1], [1, 5]]) <= 0.05 * np.array([[5, 1], [1, 5]])).all())
    assert good >= 9


def test_fit_trivial_cases():
    assert fit_block_matrix(complete_graph(6), np.ones(6, int), "explicit").q[0, 0] == 1.0
    empty = Graph.from_edges(10, [])
    assert (fit_block_matrix(empty, np.repeat([1, 2], 5)).q == 0).all()
    with pytest.raises(FitError):
        fit_block_matrix(empty, np.ones(10, int), k=2)


def test_fit_error_shrinks_with_n():
    errs = []
    for n in (10_000, 50_000):
        e = []
        for seed in range(4):
            x, g = sample_sbm(SbmParams.symmetric(2, 5, 1), n, seed)
            e.append(np.abs(fit_block_matrix(g, x).q - [[5, 1], [1, 5]]).max())
        errs.append(np.mean(e))
    assert errs[1] < errs[0]
