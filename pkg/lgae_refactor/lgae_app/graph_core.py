
"""Sparse graph representation and the renormalized propagation operator S."""

import hashlib
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .exceptions import ContractViolationError, MalformedDatasetError, ShapeMismatchError


def _canonical_edges(num_nodes: int, pairs: Iterable[Tuple[int, int]]) -> np.ndarray:
    edges = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs, dtype=np.int64)
    if edges.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if edges.ndim != 2 or edges.shape[1] != 2:
        raise MalformedDatasetError(f"Edges must be a list of pairs, got shape {edges.shape}")
    if edges.min() < 0 or edges.max() >= num_nodes:
        raise MalformedDatasetError(
            f"Edge endpoint out of range [0, {num_nodes}): min={edges.min()} max={edges.max()}"
        )
    loops = edges[:, 0] == edges[:, 1]
    if loops.any():
        node = int(edges[loops][0, 0])
        raise MalformedDatasetError(f"Self-loop on node {node}; S adds its own self-loops")
    canonical = np.sort(edges, axis=1)
    return np.unique(canonical, axis=0)


@dataclass(frozen=True, eq=False)
class GraphDataset:
    """An undirected graph with optional dense node features.

    ``edges`` is an (m, 2) int64 array in canonical form: u < v, no duplicates,
    rows sorted lexicographically.
    """

    num_nodes: int
    edges: np.ndarray
    features: Optional[np.ndarray] = None
    name: str = "graph"

    def __post_init__(self) -> None:
        if self.num_nodes < 0:
            raise MalformedDatasetError(f"num_nodes must be non-negative, got {self.num_nodes}")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if edges.min() < 0 or edges.max() >= self.num_nodes:
                raise MalformedDatasetError("Edge endpoint out of range")
            if not (edges[:, 0] < edges[:, 1]).all():
                raise MalformedDatasetError("Edges must be stored with u < v and without self-loops")
            if len(np.unique(edges, axis=0)) != len(edges):
                raise MalformedDatasetError("Duplicate edges in stored edge list")
        object.__setattr__(self, "edges", edges)
        if self.features is not None:
            features = np.ascontiguousarray(self.features, dtype=np.float64)
            if features.ndim != 2 or features.shape[0] != self.num_nodes:
                raise MalformedDatasetError(
                    f"Feature matrix has shape {features.shape}, expected ({self.num_nodes}, d)"
                )
            if not np.isfinite(features).all():
                raise MalformedDatasetError("Feature matrix contains non-finite values")
            object.__setattr__(self, "features", features)

    @classmethod
    def from_pairs(
        cls,
        num_nodes: int,
        pairs: Iterable[Tuple[int, int]],
        features: Optional[np.ndarray] = None,
        name: str = "graph",
    ) -> "GraphDataset":
        """Build a dataset from raw pairs, folding both directions and duplicates."""
        return cls(num_nodes, _canonical_edges(num_nodes, pairs), features, name)

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def feature_dim(self) -> int:
        return 0 if self.features is None else int(self.features.shape[1])

    def with_edges(self, edges: np.ndarray, name: Optional[str] = None) -> "GraphDataset":
        return GraphDataset.from_pairs(self.num_nodes, edges, self.features, name or self.name)

    @cached_property
    def _digest(self) -> str:
        digest = hashlib.sha256()
        digest.update(np.int64(self.num_nodes).tobytes())
        digest.update(self.edges.astype("<i8").tobytes())
        if self.features is not None:
            digest.update(np.int64(self.feature_dim).tobytes())
            digest.update(self.features.astype("<f8").tobytes())
        return digest.hexdigest()

    def content_hash(self) -> str:
        return self._digest

    def same_as(self, other: "GraphDataset") -> bool:
        if self.num_nodes != other.num_nodes or not np.array_equal(self.edges, other.edges):
            return False
        if (self.features is None) != (other.features is None):
            return False
        return self.features is None or np.array_equal(self.features, other.features)


def adjacency_from_edges(dataset: GraphDataset) -> sp.csr_matrix:
    """Symmetric 0/1 adjacency with zero diagonal."""
    n = dataset.num_nodes
    edges = dataset.edges
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        raise MalformedDatasetError(f"Edge endpoint out of range for {n} nodes")
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    data = np.ones(rows.shape[0], dtype=np.float64)
    adjacency = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    adjacency.sum_duplicates()
    adjacency.sort_indices()
    adjacency.eliminate_zeros()
    return adjacency


def _require_square(matrix: sp.spmatrix, what: str) -> int:
    n_rows, n_cols = matrix.shape
    if n_rows != n_cols:
        raise ShapeMismatchError(f"{what} must be square, got {n_rows}x{n_cols}")
    return n_rows


def degrees(adjacency: sp.spmatrix) -> np.ndarray:
    _require_square(adjacency, "Adjacency")
    return np.asarray(adjacency.sum(axis=1), dtype=np.float64).ravel()


def normalized_operator(adjacency: sp.spmatrix) -> sp.csr_matrix:
    """S = D̃^{-1/2} (A + I) D̃^{-1/2} with D̃ = D + I.

    Each entry is computed as ã_ij / sqrt(d̃_i * d̃_j), so S is exactly symmetric.
    """
    n = _require_square(adjacency, "Adjacency")
    adjacency = sp.csr_matrix(adjacency, dtype=np.float64)
    if (adjacency != adjacency.T).nnz:
        raise ContractViolationError("Adjacency matrix is not symmetric")
    if adjacency.nnz and adjacency.data.min() < 0:
        raise ContractViolationError("Adjacency matrix has negative entries")
    if np.any(adjacency.diagonal() != 0):
        raise ContractViolationError("Adjacency matrix has a non-zero diagonal")

    tilde_degrees = degrees(adjacency) + 1.0
    augmented = (adjacency + sp.identity(n, dtype=np.float64, format="csr")).tocoo()
    values = augmented.data / np.sqrt(tilde_degrees[augmented.row] * tilde_degrees[augmented.col])
    operator = sp.csr_matrix((values, (augmented.row, augmented.col)), shape=(n, n))
    operator.sort_indices()
    return operator


def spmm(operator: sp.spmatrix, dense: np.ndarray) -> np.ndarray:
    """Sparse-dense product; rows accumulate left to right, so results are reproducible."""
    if operator.shape[1] != dense.shape[0]:
        raise ShapeMismatchError(
            f"Cannot multiply {operator.shape[0]}x{operator.shape[1]} by "
            f"{dense.shape[0]}x{dense.shape[1]}"
        )
    operator = sp.csr_matrix(operator, dtype=np.float64)
    return np.asarray(operator @ np.ascontiguousarray(dense, dtype=np.float64))
