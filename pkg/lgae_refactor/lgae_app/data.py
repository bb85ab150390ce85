
"""Plain-text dataset ingestion, manifests and synthetic graphs."""

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

import networkx as nx
import numpy as np

from . import storage
from .config import read_key_values
from .exceptions import ConfigError, DatasetParseError, IntegrityError, MalformedDatasetError
from .graph_core import GraphDataset

logger = logging.getLogger(__name__)

EDGES_FILE = "edges.txt"
FEATURES_FILE = "features.txt"
MANIFEST_FILE = "manifest.txt"

SYNTHETIC_KINDS = ("erdos_renyi", "path", "star", "complete")


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    num_nodes: int
    num_edges: int
    feature_dim: int
    sha256_edges: str
    sha256_features: str = ""

    @property
    def content_hash(self) -> str:
        return hashlib.sha256(f"{self.sha256_edges}:{self.sha256_features}".encode("ascii")).hexdigest()

    def to_text(self) -> str:
        lines = [
            f"name={self.name}",
            f"num_nodes={self.num_nodes}",
            f"num_edges={self.num_edges}",
            f"feature_dim={self.feature_dim}",
            f"sha256_edges={self.sha256_edges}",
            f"sha256_features={self.sha256_features}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def read(cls, path: Path) -> "DatasetManifest":
        try:
            values: Dict[str, str] = read_key_values(path)
        except ConfigError as exc:
            raise MalformedDatasetError(str(exc)) from exc
        try:
            return cls(
                name=values["name"],
                num_nodes=int(values["num_nodes"]),
                num_edges=int(values["num_edges"]),
                feature_dim=int(values.get("feature_dim", "0")),
                sha256_edges=values["sha256_edges"],
                sha256_features=values.get("sha256_features", ""),
            )
        except (KeyError, ValueError) as exc:
            raise MalformedDatasetError(f"Invalid manifest {path}: {exc}") from exc


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _decode(data: bytes, source: str) -> str:
    try:
        return data.decode("ascii")
    except UnicodeDecodeError as exc:
        lineno = data.count(b"\n", 0, exc.start) + 1
        raise DatasetParseError(f"non-ASCII byte 0x{data[exc.start]:02x}", lineno, source) from exc


def parse_edges(text: str, num_nodes: int, source: Optional[str] = None) -> np.ndarray:
    """Parse ``u v`` lines; both directions and repeats fold into one canonical edge."""
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise DatasetParseError(f"expected 'u v', got {raw!r}", lineno, source)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise DatasetParseError(f"non-integer node index in {raw!r}", lineno, source) from exc
        if u < 0 or v < 0 or u >= num_nodes or v >= num_nodes:
            raise MalformedDatasetError(f"{source or 'edges'}:{lineno}: node index out of range [0, {num_nodes})")
        if u == v:
            raise MalformedDatasetError(f"{source or 'edges'}:{lineno}: self-loop on node {u}")
        pairs.append((u, v))
    return GraphDataset.from_pairs(num_nodes, pairs).edges


def parse_features(text: str, num_nodes: int, source: Optional[str] = None) -> np.ndarray:
    rows = []
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            row = np.array(raw.split(), dtype=np.float64)
        except ValueError as exc:
            raise DatasetParseError(f"non-numeric feature value: {exc}", lineno, source) from exc
        if width is None:
            width = row.size
        elif row.size != width:
            raise DatasetParseError(f"expected {width} values, got {row.size}", lineno, source)
        rows.append(row)
    if len(rows) != num_nodes:
        raise MalformedDatasetError(f"{source or 'features'}: {len(rows)} feature rows for {num_nodes} nodes")
    return np.vstack(rows) if rows else np.zeros((0, 0))


def load_dataset(path: Path) -> GraphDataset:
    """Load a dataset directory after checking its files against the manifest."""
    path = Path(path)
    manifest_path = path / MANIFEST_FILE
    if not manifest_path.exists():
        raise MalformedDatasetError(f"Dataset manifest not found: {manifest_path}")
    manifest = DatasetManifest.read(manifest_path)

    try:
        edge_bytes = (path / EDGES_FILE).read_bytes()
        feature_bytes = (path / FEATURES_FILE).read_bytes() if manifest.feature_dim else b""
    except OSError as exc:
        raise MalformedDatasetError(f"Cannot read dataset {path}: {exc}") from exc
    if _sha256(edge_bytes) != manifest.sha256_edges:
        raise IntegrityError(f"{path / EDGES_FILE} does not match its manifest hash")
    if manifest.feature_dim and _sha256(feature_bytes) != manifest.sha256_features:
        raise IntegrityError(f"{path / FEATURES_FILE} does not match its manifest hash")

    edges_source = str(path / EDGES_FILE)
    edges = parse_edges(_decode(edge_bytes, edges_source), manifest.num_nodes, edges_source)
    if len(edges) != manifest.num_edges:
        raise IntegrityError(f"Manifest lists {manifest.num_edges} edges, {EDGES_FILE} holds {len(edges)}")
    features = None
    if manifest.feature_dim:
        features_source = str(path / FEATURES_FILE)
        features = parse_features(_decode(feature_bytes, features_source), manifest.num_nodes, features_source)
        if features.shape[1] != manifest.feature_dim:
            raise IntegrityError(f"Manifest lists feature_dim={manifest.feature_dim}, file has {features.shape[1]}")

    dataset = GraphDataset(manifest.num_nodes, edges, features, manifest.name)
    logger.info(
        "[Data] Loaded %s: %d nodes, %d edges, feature_dim=%d",
        dataset.name,
        dataset.num_nodes,
        dataset.num_edges,
        dataset.feature_dim,
    )
    return dataset


def save_dataset(dataset: GraphDataset, path: Path) -> DatasetManifest:
    path = Path(path)
    edge_bytes = "".join(f"{u} {v}\n" for u, v in dataset.edges.tolist()).encode("ascii")
    feature_bytes = b""
    if dataset.features is not None:
        feature_bytes = "".join(
            " ".join(format(value, ".17g") for value in row) + "\n" for row in dataset.features.tolist()
        ).encode("ascii")
    manifest = DatasetManifest(
        name=dataset.name,
        num_nodes=dataset.num_nodes,
        num_edges=dataset.num_edges,
        feature_dim=dataset.feature_dim,
        sha256_edges=_sha256(edge_bytes),
        sha256_features=_sha256(feature_bytes) if dataset.features is not None else "",
    )
    storage.save_file(edge_bytes, EDGES_FILE, path)
    if dataset.features is not None:
        storage.save_file(feature_bytes, FEATURES_FILE, path)
    storage.save_file(manifest.to_text().encode("ascii"), MANIFEST_FILE, path)
    return manifest


def index_dataset(path: Path, name: str, num_nodes: int) -> DatasetManifest:
    """Write manifest.txt for hand-converted edges.txt / features.txt files."""
    path = Path(path)
    try:
        edge_bytes = (path / EDGES_FILE).read_bytes()
        features_path = path / FEATURES_FILE
        feature_bytes = features_path.read_bytes() if features_path.exists() else None
    except OSError as exc:
        raise MalformedDatasetError(f"Cannot read dataset {path}: {exc}") from exc
    edges_source = str(path / EDGES_FILE)
    edges = parse_edges(_decode(edge_bytes, edges_source), num_nodes, edges_source)
    feature_dim = 0
    if feature_bytes is not None:
        features = parse_features(_decode(feature_bytes, str(features_path)), num_nodes, str(features_path))
        feature_dim = features.shape[1]
    manifest = DatasetManifest(
        name=name,
        num_nodes=num_nodes,
        num_edges=len(edges),
        feature_dim=feature_dim,
        sha256_edges=_sha256(edge_bytes),
        sha256_features=_sha256(feature_bytes) if feature_bytes is not None else "",
    )
    storage.save_file(manifest.to_text().encode("ascii"), MANIFEST_FILE, path)
    logger.info("[Data] Indexed %s: %d nodes, %d edges, feature_dim=%d", name, num_nodes, len(edges), feature_dim)
    return manifest


def generate_synthetic(
    kind: str,
    n: int,
    p: Optional[float] = None,
    seed: int = 0,
    feature_dim: int = 8,
    name: Optional[str] = None,
) -> GraphDataset:
    """Seeded test graphs; features are uniform on [0, 1)."""
    if n < 1:
        raise ConfigError(f"Synthetic graphs need at least one node, got n={n}")
    if kind == "erdos_renyi":
        if p is None or not 0 <= p <= 1:
            raise ConfigError(f"erdos_renyi needs 0 <= p <= 1, got {p}")
        graph = nx.gnp_random_graph(n, p, seed=seed)
    elif kind == "path":
        graph = nx.path_graph(n)
    elif kind == "star":
        graph = nx.star_graph(n - 1)
    elif kind == "complete":
        graph = nx.complete_graph(n)
    else:
        raise ConfigError(f"Unknown synthetic graph kind {kind!r}; expected one of {', '.join(SYNTHETIC_KINDS)}")

    edges = np.array(list(graph.edges()), dtype=np.int64).reshape(-1, 2)
    features = np.random.default_rng(seed).random((n, feature_dim)) if feature_dim > 0 else None
    return GraphDataset.from_pairs(n, edges, features, name or f"{kind}-{n}")
