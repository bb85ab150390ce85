
import networkx as nx
import numpy as np
import pytest

from lgae_app import propagation
from lgae_app.data import generate_synthetic
from lgae_app.exceptions import ConfigError, ShapeMismatchError
from lgae_app.graph_core import GraphDataset, adjacency_from_edges, degrees, normalized_operator
from lgae_app.propagation import (
    PropagationConfig,
    cache_path,
    identity_features,
    propagate,
    propagate_identity,
    smoothed_features,
)


def test_zero_hops_returns_a_copy(cliques, cliques_operator):
    smoothed = propagate(cliques_operator, cliques.features, 0)
    np.testing.assert_array_equal(smoothed, cliques.features)
    assert smoothed is not cliques.features


def test_hops_compose(cliques, cliques_operator):
    two_then_one = propagate(cliques_operator, propagate(cliques_operator, cliques.features, 2), 1)
    np.testing.assert_array_equal(two_then_one, propagate(cliques_operator, cliques.features, 3))


def test_complete_graph_averages_features():
    n = 6
    graph = GraphDataset.from_pairs(n, [(u, v) for u in range(n) for v in range(u + 1, n)])
    operator = normalized_operator(adjacency_from_edges(graph))
    features = np.random.default_rng(1).random((n, 3))
    smoothed = propagate(operator, features, 1)
    np.testing.assert_allclose(smoothed, np.tile(features.mean(axis=0), (n, 1)), rtol=1e-12)


def test_identity_one_hop_is_the_operator(path3):
    operator = normalized_operator(adjacency_from_edges(path3))
    np.testing.assert_array_equal(propagate_identity(operator, 1), operator.toarray())


def test_blocked_identity_is_bit_identical(cliques_operator):
    n = cliques_operator.shape[0]
    full = propagate(cliques_operator, identity_features(n), 3)
    np.testing.assert_array_equal(propagate_identity(cliques_operator, 3, block_cols=5), full)


def test_hop_cap_is_enforced():
    with pytest.raises(ConfigError):
        PropagationConfig(k=65)
    with pytest.raises(ConfigError):
        PropagationConfig(k=-1)


def test_row_mismatch_is_rejected(cliques_operator):
    with pytest.raises(ShapeMismatchError):
        propagate(cliques_operator, np.ones((3, 2)), 1)


def test_cache_round_trip_skips_recompute(tmp_path, cliques, cliques_operator, monkeypatch):
    config = PropagationConfig(k=2)
    first = smoothed_features(cliques, cliques_operator, config, tmp_path)
    assert cache_path(tmp_path, cliques, config).exists()

    def fail(*args, **kwargs):
        raise AssertionError("cache was not used")

    monkeypatch.setattr(propagation, "propagate", fail)
    np.testing.assert_array_equal(smoothed_features(cliques, cliques_operator, config, tmp_path), first)


def test_unreadable_cache_is_recomputed(tmp_path, cliques, cliques_operator):
    config = PropagationConfig(k=1)
    cache_path(tmp_path, cliques, config).write_bytes(b"not a cache")
    smoothed = smoothed_features(cliques, cliques_operator, config, tmp_path)
    np.testing.assert_array_equal(smoothed, propagate(cliques_operator, cliques.features, 1))


def test_featureless_and_feature_caches_do_not_collide(tmp_path, cliques):
    assert cache_path(tmp_path, cliques, PropagationConfig(2, True)) != cache_path(
        tmp_path, cliques, PropagationConfig(2, False)
    )


def test_missing_features_need_featureless_stream(triangle):
    operator = normalized_operator(adjacency_from_edges(triangle))
    with pytest.raises(ConfigError, match="featureless"):
        smoothed_features(triangle, operator, PropagationConfig(k=1))


def _random_operator(rng, max_nodes):
    n = int(rng.integers(1, max_nodes + 1))
    p = float(rng.random()) * 0.5
    graph = generate_synthetic("erdos_renyi", n, p=p, seed=int(rng.integers(2**31)), feature_dim=0)
    return normalized_operator(adjacency_from_edges(graph))


def test_propagation_matches_dense_matrix_power():
    rng = np.random.default_rng(42)
    for _ in range(100):
        operator = _random_operator(rng, 50)
        n = operator.shape[0]
        k = int(rng.integers(0, 9))
        features = rng.normal(size=(n, int(rng.integers(1, 6))))
        power = np.linalg.matrix_power(operator.toarray(), k)
        np.testing.assert_allclose(propagate(operator, features, k), power @ features, rtol=0, atol=1e-10)
        np.testing.assert_allclose(propagate_identity(operator, k, block_cols=7), power, rtol=0, atol=1e-10)


def _connected(rng, n):
    pairs = [(u, u + 1) for u in range(n - 1)]
    extra = nx.gnp_random_graph(n, 0.2, seed=int(rng.integers(2**31))).edges()
    return GraphDataset.from_pairs(n, pairs + list(extra))


def test_regular_graph_column_variance_never_grows():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = 2 * int(rng.integers(3, 16))
        graph = nx.random_regular_graph(3, n, seed=int(rng.integers(2**31)))
        if not nx.is_connected(graph):
            continue
        operator = normalized_operator(adjacency_from_edges(GraphDataset.from_pairs(n, list(graph.edges()))))
        smoothed = rng.normal(size=(n, 3))
        variance = smoothed.var(axis=0)
        for _ in range(8):
            smoothed = propagate(operator, smoothed, 1)
            assert (smoothed.var(axis=0) <= variance + 1e-12).all()
            variance = smoothed.var(axis=0)


def test_spread_around_the_stationary_direction_never_grows():
    rng = np.random.default_rng(6)
    for _ in range(30):
        n = int(rng.integers(2, 41))
        graph = _connected(rng, n)
        operator = normalized_operator(adjacency_from_edges(graph))
        stationary = np.sqrt(degrees(adjacency_from_edges(graph)) + 1.0)
        stationary /= np.linalg.norm(stationary)
        smoothed = rng.normal(size=(n, 4))

        def spread(values):
            residual = values - np.outer(stationary, stationary @ values)
            return np.linalg.norm(residual, axis=0)

        previous = spread(smoothed)
        for _ in range(8):
            smoothed = propagate(operator, smoothed, 1)
            current = spread(smoothed)
            assert (current <= previous + 1e-12).all()
            previous = current
