
import itertools

import numpy as np
import pytest

from lgae_app.data import save_dataset
from lgae_app.graph_core import GraphDataset, adjacency_from_edges, normalized_operator


def two_cliques(size: int = 12, feature_dim: int = 4, seed: int = 0) -> GraphDataset:
    """Two complete graphs on ``size`` nodes joined by one bridge edge."""
    left = list(itertools.combinations(range(size), 2))
    right = [(u + size, v + size) for u, v in left]
    features = np.random.default_rng(seed).random((2 * size, feature_dim)) if feature_dim else None
    return GraphDataset.from_pairs(2 * size, left + right + [(0, size)], features, name="cliques")


@pytest.fixture
def triangle() -> GraphDataset:
    return GraphDataset.from_pairs(3, [(0, 1), (1, 2), (0, 2)], name="triangle")


@pytest.fixture
def path3() -> GraphDataset:
    return GraphDataset.from_pairs(3, [(0, 1), (1, 2)], np.arange(6, dtype=float).reshape(3, 2), name="path3")


@pytest.fixture
def cliques() -> GraphDataset:
    return two_cliques()


@pytest.fixture
def cliques_operator(cliques):
    return normalized_operator(adjacency_from_edges(cliques))


@pytest.fixture
def cliques_dir(tmp_path, cliques):
    path = tmp_path / "cliques"
    save_dataset(cliques, path)
    return path
