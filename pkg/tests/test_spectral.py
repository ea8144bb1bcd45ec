import numpy as np
import pytest

from sbmlab.graph import (Graph, complete_graph, count_nb_walks_bruteforce, disjoint_cliques,
                          path_graph, star_graph)
from sbmlab.metrics import agreement, partition_to_labels, separation
from sbmlab.model import SbmParams, sample_sbm
from sbmlab.nonbacktracking import ResourceError, build_nb_operator
from sbmlab.oracle import dense_eigs
from sbmlab.spectral import (DegenerateGraphError, UnsupportedError, adjacency_second_eigvec,
                             default_power_steps, laplacian_second_eigvec, nb_power_detect,
                             nb_second_eigvec_detect, sdp_certificate)
from sbmlab.thresholds import snr

from helpers import nb_states, random_graph, random_regular, two_cliques


# -- operator ------------------------------------------------------------------

def test_operator_examples():
    b = build_nb_operator(complete_graph(3), 2)
    m = b.to_sparse().toarray()
    assert m.shape == (6, 6)
    assert (m.sum(axis=1) == 1).all() and (m.sum(axis=0) == 1).all()
    b = build_nb_operator(path_graph(3), 2)
    m = b.to_sparse().toarray()
    assert m.shape == (4, 4) and m.sum() == 2
    assert not (m @ m).any()
    star = star_graph(3)
    b = build_nb_operator(star, 2)
    m = b.to_sparse().toarray()
    for leaf in (1, 2, 3):
        assert m[b.state_id((leaf, 0))].sum() == 2


def test_operator_apply_matches_sparse():
    g = random_graph(15, 0.3, 3)
    for r in (2, 3, 4):
        b = build_nb_operator(g, r)
        y = np.random.default_rng(r).standard_normal(b.num_states)
        np.testing.assert_allclose(b.apply(y), b.to_sparse() @ y)
    assert build_nb_operator(g, 2).num_states == 2 * g.num_edges


def test_operator_state_cap():
    with pytest.raises(ResourceError):
        build_nb_operator(complete_graph(12), 4, cap=100)


@pytest.mark.parametrize("r", [2, 3, 4])
def test_operator_powers_match_bruteforce(r):
    for seed in range(3):
        g = random_graph(8, 0.45, 10 * r + seed)
        states = nb_states(g, r)
        if not states:
            continue
        b = build_nb_operator(g, r)
        dense = b.to_sparse().toarray()
        power = np.eye(b.num_states)
        sample = states[:: max(1, len(states) // 8)]
        for length in range(1, 7):
            for e in sample:
                for f in sample:
                    assert power[b.state_id(e), b.state_id(f)] == count_nb_walks_bruteforce(
                        g, e, f, length, r)
            power = power @ dense


def test_regular_graph_perron_value():
    g = random_regular(200, 4, 1)
    b = build_nb_operator(g, 2)
    y = np.random.default_rng(0).random(b.num_states)
    for _ in range(200):
        y = b.apply(y)
        y /= np.linalg.norm(y)
    assert y @ b.apply(y) == pytest.approx(3.0, abs=1e-6)


def test_triangle_spectrum_on_unit_circle():
    vals = dense_eigs(build_nb_operator(complete_graph(3), 2).to_sparse()).values
    np.testing.assert_allclose(np.abs(vals), 1.0, atol=1e-9)


# -- nb power iteration ------------------------------------------------------------

def test_default_power_steps():
    assert default_power_steps(10_000, 4 / 3) == int(np.ceil(2 * np.log(1e4) / np.log(4 / 3))) + 5
    assert default_power_steps(10_000) == int(np.ceil(3 * np.log(1e4)))


def test_nb_power_two_cliques():
    g, truth = two_cliques()
    hits = sum(agreement(truth, partition_to_labels(nb_power_detect(g, m=30, seed=s).partition)) == 1
               for s in range(10))
    assert hits >= 9


def test_nb_power_sign_symmetry():
    _, g = sample_sbm(SbmParams.symmetric(2, 5, 1), 2000, 0)
    y0 = np.random.default_rng(0).standard_normal(g.num_directed)
    a = nb_power_detect(g, m=20, init=y0)
    b = nb_power_detect(g, m=20, init=-y0)
    np.testing.assert_allclose(a.scores, -b.scores)
    nz = a.scores != 0
    assert (a.partition[nz] != b.partition[nz]).all()


def test_nb_power_er_no_signal():
    ok = 0
    for s in range(10):
        x, g = sample_sbm(SbmParams.symmetric(2, 3, 3), 10_000, s)
        ok += separation(x, nb_power_detect(g, seed=s).partition) <= 0.03
    assert ok >= 9


def test_nb_power_ssbm_above_ks():
    params = SbmParams.symmetric(2, 5, 1)
    ratio = snr(params)[0]
    ok = 0
    for s in range(10):
        x, g = sample_sbm(params, 30_000, s)
        m = default_power_steps(g.n, ratio)
        ok += separation(x, nb_power_detect(g, m=m, seed=s).partition) >= 0.1
    assert ok >= 9


def test_nb_power_empty_graph():
    with pytest.raises(DegenerateGraphError):
        nb_power_detect(Graph.from_edges(5, []))


# -- second eigenvector ----------------------------------------------------------------

def test_nb_eig_two_cliques_against_dense_oracle():
    g, truth = two_cliques()
    res = nb_second_eigvec_detect(g)
    assert agreement(truth, partition_to_labels(res.partition)) == 1.0
    assert res.above_bulk and res.converged
    oracle = dense_eigs(build_nb_operator(g, 2).to_sparse()).values
    mags = np.sort(np.abs(oracle))[::-1]
    assert abs(res.top_eigenvalues[0][0]) == pytest.approx(mags[0], rel=1e-8)
    assert abs(res.top_eigenvalues[1][0]) == pytest.approx(mags[1], rel=1e-8)


def test_nb_eig_regular_graph_reports_no_outlier():
    below = 0
    for s in range(10):
        res = nb_second_eigvec_detect(random_regular(10_000, 3, s), seed=s)
        below += not res.above_bulk
        if res.converged:
            assert all(r <= 1e-6 for _, r in res.top_eigenvalues)
    assert below >= 9


def test_nb_eig_ssbm():
    ok = 0
    for s in range(10):
        x, g = sample_sbm(SbmParams.symmetric(2, 5, 1), 10_000, s)
        ok += separation(x, nb_second_eigvec_detect(g, tau=0.0, seed=s).partition) >= 0.1
    assert ok >= 8


# -- classical baselines -------------------------------------------------------------------

def test_laplacian_disjoint_cliques():
    g = disjoint_cliques([8, 8])
    res = laplacian_second_eigvec(g)
    assert agreement(np.repeat([1, 2], 8), partition_to_labels(res.partition)) == 1.0
    assert res.top_eigenvalues[1][0] == pytest.approx(0.0, abs=1e-8)


def test_baselines_log_regime():
    params = SbmParams.symmetric(2, 20, 2, "logarithmic")
    ok_adj = ok_lap = 0
    for s in range(10):
        x, g = sample_sbm(params, 2000, s)
        ok_adj += agreement(x, partition_to_labels(adjacency_second_eigvec(g).partition)) >= 0.95
        ok_lap += agreement(x, partition_to_labels(laplacian_second_eigvec(g).partition)) >= 0.95
    assert ok_adj >= 8 and ok_lap >= 8


def test_adjacency_sparse_baseline_recorded():
    # no assertion on quality: the sparse regime is where this baseline may fail
    x, g = sample_sbm(SbmParams.symmetric(2, 5, 1), 30_000, 0)
    sep = separation(x, adjacency_second_eigvec(g).partition)
    assert 0.0 <= sep <= 1.0


# -- SDP certificate ----------------------------------------------------------------------

def test_sdp_certificate_examples():
    g = disjoint_cliques([6, 6])
    truth = np.repeat([1, 2], 6)
    lam, holds = sdp_certificate(g, truth)
    dense = 2 * (np.diag(g.degrees) - g.adjacency().toarray()) + np.ones((12, 12)) + np.eye(12)
    assert lam == pytest.approx(np.linalg.eigvalsh(dense)[0], abs=1e-9)
    assert holds
    lam, holds = sdp_certificate(Graph.from_edges(8, []), np.repeat([1, 2], 4))
    assert lam == pytest.approx(1.0) and holds
    with pytest.raises(UnsupportedError):
        sdp_certificate(Graph.from_edges(3, [(0, 1)]), [1, 2, 3])


def test_sdp_certificate_matrix_free_matches_dense():
    x, g = sample_sbm(SbmParams.symmetric(2, 25, 1, "logarithmic"), 300, 1)
    lam, _ = sdp_certificate(g, x)
    same = x[:, None] == x[None, :]
    a = g.adjacency().toarray()
    d_in, d_out = (a * same).sum(1), (a * ~same).sum(1)
    dense = 2 * (np.diag(d_in - d_out) - a) + 1 + np.eye(g.n)
    assert lam == pytest.approx(np.linalg.eigvalsh(dense)[0], abs=1e-6)
