
import hashlib
import math

import numpy as np
import pytest

from lgae_app.data import (
    EDGES_FILE,
    FEATURES_FILE,
    MANIFEST_FILE,
    DatasetManifest,
    generate_synthetic,
    index_dataset,
    load_dataset,
    parse_edges,
    parse_features,
    save_dataset,
)
from lgae_app.exceptions import ConfigError, DatasetParseError, IntegrityError, MalformedDatasetError


def test_save_and_load(tmp_path):
    dataset = generate_synthetic("erdos_renyi", 30, p=0.2, seed=3, name="er30")
    manifest = save_dataset(dataset, tmp_path / "er30")
    loaded = load_dataset(tmp_path / "er30")
    assert loaded.same_as(dataset)
    assert loaded.name == "er30"
    assert manifest.num_edges == dataset.num_edges
    assert DatasetManifest.read(tmp_path / "er30" / MANIFEST_FILE) == manifest


def test_both_directions_count_once():
    np.testing.assert_array_equal(parse_edges("0 1\n1 0\n", 2), [[0, 1]])


def test_self_loop_line_is_rejected():
    with pytest.raises(MalformedDatasetError, match=":2: self-loop"):
        parse_edges("0 1\n3 3\n", 4, "edges.txt")


def test_out_of_range_line_is_rejected():
    with pytest.raises(MalformedDatasetError, match="out of range"):
        parse_edges("0 5\n", 3)


def test_unparseable_line_reports_its_number():
    with pytest.raises(DatasetParseError) as excinfo:
        parse_edges("0 1\n\n0 x\n", 3, "edges.txt")
    assert excinfo.value.line_number == 3
    assert "edges.txt:3" in str(excinfo.value)


def test_ragged_features_are_rejected():
    with pytest.raises(DatasetParseError):
        parse_features("1 2\n3\n", 2)
    with pytest.raises(MalformedDatasetError):
        parse_features("1 2\n", 2)


def test_tampered_edges_fail_the_hash_check(cliques_dir):
    with open(cliques_dir / EDGES_FILE, "a", encoding="ascii") as handle:
        handle.write("2 23\n")
    with pytest.raises(IntegrityError):
        load_dataset(cliques_dir)


def test_missing_manifest(tmp_path):
    with pytest.raises(MalformedDatasetError, match="manifest"):
        load_dataset(tmp_path)


def test_index_hand_converted_files(tmp_path):
    (tmp_path / EDGES_FILE).write_text("0 1\n1 2\n2 0\n1 0\n")
    (tmp_path / FEATURES_FILE).write_text("1 0\n0 1\n1 1\n")
    manifest = index_dataset(tmp_path, "tri", 3)
    assert (manifest.num_edges, manifest.feature_dim) == (3, 2)
    dataset = load_dataset(tmp_path)
    assert dataset.name == "tri"
    np.testing.assert_array_equal(dataset.features, [[1, 0], [0, 1], [1, 1]])


def test_byte_order_mark_is_a_parse_error(tmp_path):
    (tmp_path / EDGES_FILE).write_bytes("\ufeff0 1\n1 2\n".encode("utf-8"))
    with pytest.raises(DatasetParseError, match=r"edges.txt:1: non-ASCII byte 0xef") as info:
        index_dataset(tmp_path, "bom", 3)
    assert info.value.line_number == 1


def test_non_ascii_feature_line_reports_its_number(tmp_path):
    edge_bytes = b"0 1\n1 2\n"
    feature_bytes = "1 0\n0 1\n1 \u00e9\n".encode("utf-8")
    (tmp_path / EDGES_FILE).write_bytes(edge_bytes)
    (tmp_path / FEATURES_FILE).write_bytes(feature_bytes)
    manifest = DatasetManifest(
        name="latin",
        num_nodes=3,
        num_edges=2,
        feature_dim=2,
        sha256_edges=hashlib.sha256(edge_bytes).hexdigest(),
        sha256_features=hashlib.sha256(feature_bytes).hexdigest(),
    )
    (tmp_path / MANIFEST_FILE).write_text(manifest.to_text())
    with pytest.raises(DatasetParseError) as info:
        load_dataset(tmp_path)
    assert info.value.line_number == 3
    assert info.value.path.endswith(FEATURES_FILE)


def test_erdos_renyi_edge_count_is_plausible():
    n, p = 200, 0.05
    pairs = n * (n - 1) // 2
    dataset = generate_synthetic("erdos_renyi", n, p=p, seed=1)
    assert abs(dataset.num_edges - pairs * p) < 5 * math.sqrt(pairs * p * (1 - p))


def test_small_named_graphs():
    star = generate_synthetic("star", 5)
    assert star.num_edges == 4
    assert (star.edges[:, 0] == 0).all()
    assert generate_synthetic("path", 5).num_edges == 4
    assert generate_synthetic("complete", 5).num_edges == 10


def test_synthetic_features():
    assert generate_synthetic("path", 4, feature_dim=0).features is None
    dataset = generate_synthetic("path", 4, feature_dim=3, seed=2)
    assert dataset.features.shape == (4, 3)
    np.testing.assert_array_equal(dataset.features, generate_synthetic("path", 4, feature_dim=3, seed=2).features)


def test_synthetic_arguments_are_validated():
    with pytest.raises(ConfigError):
        generate_synthetic("lattice", 5)
    with pytest.raises(ConfigError):
        generate_synthetic("erdos_renyi", 5)
