
"""On-disk formats: X̄ cache, parameter checkpoints, split files and JSON reports.

Every write goes to a temporary file in the target directory and is renamed
into place, so a concurrent reader sees either the old file or the new one.
"""

import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Dict, List

import numpy as np

from .config import CACHE_DIR
from .exceptions import CacheFormatError, CacheWriteError, MalformedDatasetError
from .linkpred import EdgeSplit
from .models import ModelConfig, ModelParams, tensor_shapes

XBAR_MAGIC = b"LGAEXBAR"
PARAM_MAGIC = b"LGAEPARM"
FORMAT_VERSION = 1

_XBAR_HEADER = struct.Struct("<8sIQQ")
_PARAM_HEADER = struct.Struct("<8sII")
_U32 = struct.Struct("<I")
_SHAPE = struct.Struct("<QQ")


def save_file(data: bytes, filename: str, directory: Path | None = None) -> Path:
    directory = Path(directory or CACHE_DIR)
    target = directory / filename
    try:
        directory.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=directory, prefix=f".{filename}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
                handle.flush()
                os.fsync(handle.fileno())
            os.replace(tmp_name, target)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
    except OSError as exc:
        raise CacheWriteError(f"Unable to write {target}: {exc}") from exc
    return target


def _save_path(path: Path, data: bytes) -> Path:
    path = Path(path)
    return save_file(data, path.name, path.parent)


def _read_bytes(path: Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CacheFormatError(f"Unable to read {path}: {exc}") from exc


def write_xbar(path: Path, matrix: np.ndarray) -> Path:
    matrix = np.ascontiguousarray(matrix, dtype="<f8")
    n_rows, n_cols = matrix.shape
    header = _XBAR_HEADER.pack(XBAR_MAGIC, FORMAT_VERSION, n_rows, n_cols)
    return _save_path(path, header + matrix.tobytes())


def read_xbar(path: Path) -> np.ndarray:
    raw = _read_bytes(path)
    if len(raw) < _XBAR_HEADER.size:
        raise CacheFormatError(f"{path} is too short for an X̄ header")
    magic, version, n_rows, n_cols = _XBAR_HEADER.unpack_from(raw)
    if magic != XBAR_MAGIC:
        raise CacheFormatError(f"{path} is not an X̄ cache (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise CacheFormatError(f"{path} has unsupported version {version}")
    expected = _XBAR_HEADER.size + 8 * n_rows * n_cols
    if len(raw) != expected:
        raise CacheFormatError(f"{path} holds {len(raw)} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype="<f8", offset=_XBAR_HEADER.size)
    return data.reshape(n_rows, n_cols).astype(np.float64)


def save_checkpoint(path: Path, params: ModelParams) -> Path:
    config_bytes = params.config.to_json().encode("utf-8")
    chunks: List[bytes] = [
        _PARAM_HEADER.pack(PARAM_MAGIC, FORMAT_VERSION, len(config_bytes)),
        config_bytes,
        _U32.pack(len(params.tensors)),
    ]
    for name, value in params.tensors.items():
        # biases are stored as 1 x h rows
        matrix = np.ascontiguousarray(value if value.ndim == 2 else value.reshape(1, -1), dtype="<f8")
        encoded = name.encode("utf-8")
        chunks.extend([_U32.pack(len(encoded)), encoded, _SHAPE.pack(*matrix.shape), matrix.tobytes()])
    return _save_path(path, b"".join(chunks))


def load_checkpoint(path: Path) -> ModelParams:
    raw = _read_bytes(path)
    try:
        magic, version, config_len = _PARAM_HEADER.unpack_from(raw)
        if magic != PARAM_MAGIC:
            raise CacheFormatError(f"{path} is not a parameter checkpoint (magic {magic!r})")
        if version != FORMAT_VERSION:
            raise CacheFormatError(f"{path} has unsupported version {version}")
        offset = _PARAM_HEADER.size
        config = ModelConfig.from_dict(json.loads(raw[offset : offset + config_len].decode("utf-8")))
        offset += config_len
        (count,) = _U32.unpack_from(raw, offset)
        offset += _U32.size
        shapes = dict(tensor_shapes(config))
        tensors: Dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = _U32.unpack_from(raw, offset)
            offset += _U32.size
            name = raw[offset : offset + name_len].decode("utf-8")
            offset += name_len
            rows, cols = _SHAPE.unpack_from(raw, offset)
            offset += _SHAPE.size
            size = rows * cols
            data = np.frombuffer(raw, dtype="<f8", count=size, offset=offset)
            offset += 8 * size
            if name not in shapes:
                raise CacheFormatError(f"{path} holds unexpected tensor {name!r}")
            tensors[name] = data.astype(np.float64).reshape(shapes[name])
    except (struct.error, ValueError, KeyError, UnicodeDecodeError) as exc:
        raise CacheFormatError(f"{path} is truncated or corrupt: {exc}") from exc
    if offset != len(raw):
        raise CacheFormatError(f"{path} has {len(raw) - offset} trailing bytes")
    return ModelParams(config, tensors)


def save_split(path: Path, split: EdgeSplit) -> Path:
    lines = [f"SEED {split.seed}", f"NODES {split.num_nodes}"]
    for section, pairs in split.sections():
        lines.append(section)
        lines.extend(f"{u} {v}" for u, v in pairs.tolist())
    return _save_path(path, ("\n".join(lines) + "\n").encode("ascii"))


def load_split(path: Path) -> EdgeSplit:
    try:
        text = Path(path).read_text(encoding="ascii")
    except OSError as exc:
        raise MalformedDatasetError(f"Unable to read split file {path}: {exc}") from exc
    header: Dict[str, int] = {}
    sections: Dict[str, List[List[int]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split()
        if not parts:
            continue
        if parts[0] in ("SEED", "NODES") and len(parts) == 2:
            header[parts[0]] = int(parts[1])
        elif len(parts) == 1 and parts[0] in ("TRAIN", "VAL", "VAL_NEG", "TEST", "TEST_NEG"):
            current = sections.setdefault(parts[0], [])
        elif len(parts) == 2 and current is not None:
            try:
                current.append([int(parts[0]), int(parts[1])])
            except ValueError as exc:
                raise MalformedDatasetError(f"{path}:{lineno}: bad pair {raw!r}") from exc
        else:
            raise MalformedDatasetError(f"{path}:{lineno}: unexpected line {raw!r}")
    if "NODES" not in header:
        raise MalformedDatasetError(f"{path} lacks a NODES header")
    return EdgeSplit(
        num_nodes=header["NODES"],
        train_edges=sections.get("TRAIN", []),
        val_edges=sections.get("VAL", []),
        test_edges=sections.get("TEST", []),
        val_negatives=sections.get("VAL_NEG", []),
        test_negatives=sections.get("TEST_NEG", []),
        seed=header.get("SEED", 0),
    )


def save_json(path: Path, document: object) -> Path:
    text = json.dumps(document, indent=2, sort_keys=True) + "\n"
    return _save_path(path, text.encode("utf-8"))
