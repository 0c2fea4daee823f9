import math

import numpy as np
import pytest

from graphosc.errors import ConfigError, DomainError
from graphosc.graphon import Graphon
from graphosc.graphs import GraphSpec, degree_stats, generate, preferential_attachment


def test_complete_and_empty():
    g = generate(GraphSpec("complete", 3))
    assert np.array_equal(g.adj, np.ones((3, 3)) - np.eye(3))
    e = generate(GraphSpec("erdos_renyi", 7, seed=0, p=0.0))
    assert not e.adj.any()


def test_degree_stats_small():
    density, deg = degree_stats(generate(GraphSpec("complete", 4)))
    assert density == 1.0 and list(deg) == [3, 3, 3, 3]
    density, deg = degree_stats(generate(GraphSpec("erdos_renyi", 4, seed=1, p=0.0)))
    assert density == 0.0
    assert degree_stats(generate(GraphSpec("complete", 1)))[0] == 0.0


def test_pa_density_recount():
    g = generate(GraphSpec("preferential_attachment", 1000, seed=42))
    edges = sum(1 for i in range(1000) for j in range(i + 1, 1000) if g.adj[i, j])
    assert degree_stats(g)[0] == edges / (1000 * 999 / 2)


def test_rank1_degenerate_matches_erdos_renyi():
    p, n, reps = 0.3, 50, 500
    q = Graphon.rank1_beta_moments(math.sqrt(p), 0.0)
    dens = [degree_stats(generate(GraphSpec("rank1", n, seed=s, quantile=q)))[0] for s in range(reps)]
    se = math.sqrt(p * (1 - p) / (reps * n * (n - 1) / 2))
    assert abs(np.mean(dens) - p) <= 3 * se


def test_rank1_labels_and_weights():
    q = Graphon.rank1_beta_moments(0.7, 0.02)
    g = generate(GraphSpec("rank1", 20, seed=5, quantile=q))
    assert g.labels is not None and g.weights is not None
    np.testing.assert_allclose(g.weights, q.quantile(g.labels))
    det = generate(GraphSpec("rank1", 4, seed=0, quantile=q, deterministic_weights=True, weighted=True))
    np.testing.assert_array_equal(det.labels, [0.25, 0.5, 0.75, 1.0])
    g_ = det.weights
    assert det.adj[0, 1] == g_[0] * g_[1] and det.adj[2, 2] == 0.0


def test_generated_graphs_are_simple_and_deterministic():
    q = Graphon.rank1_beta(2.0, 3.0)
    for spec in (GraphSpec("erdos_renyi", 30, seed=9, p=0.4),
                 GraphSpec("rank1", 30, seed=9, quantile=q),
                 GraphSpec("preferential_attachment", 30, seed=9)):
        a, b = generate(spec), generate(spec)
        assert np.array_equal(a.adj, b.adj)
        assert np.array_equal(a.adj, a.adj.T) and not np.diag(a.adj).any()


def test_pa_growth_only_adds_edges():
    # the prefix of a larger run with the same stream is the smaller graph
    big = preferential_attachment(40, np.random.default_rng(3))
    for k in range(1, 40):
        sub = big[:k, :k]
        nxt = big[:k + 1, :k + 1]
        assert np.array_equal(nxt[:k, :k], sub)
        assert nxt.shape[0] == sub.shape[0] + 1


def test_spec_validation():
    with pytest.raises(DomainError):
        GraphSpec("hypercube", 3)
    with pytest.raises(DomainError):
        GraphSpec("erdos_renyi", 3, p=1.5)
    with pytest.raises(DomainError):
        GraphSpec("rank1", 3)
    with pytest.raises(ConfigError):
        GraphSpec.from_config({"kind": "rank1", "n": 3})
    spec = GraphSpec.from_config({"kind": "rank1", "n": 5,
                                  "quantile": {"kind": "rank1-beta", "alpha": 2, "beta": 2}}, seed=4)
    assert spec.seed == 4 and generate(spec).n == 5
