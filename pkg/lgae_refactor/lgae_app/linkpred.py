
"""Edge splits with frozen negative samples, and AUC / AP for link prediction."""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.special import expit
from scipy.stats import rankdata

from .config import NEGATIVE_ATTEMPTS_PER_NODE, TEST_FRAC, VAL_FRAC
from .exceptions import ConfigError, ContractViolationError, SamplingExhaustedError
from .graph_core import GraphDataset

logger = logging.getLogger(__name__)


def _pairs(values) -> np.ndarray:
    return np.asarray(values, dtype=np.int64).reshape(-1, 2)


@dataclass(frozen=True, eq=False)
class EdgeSplit:
    """Disjoint positive edge sets plus frozen negatives; all pairs stored as u < v."""

    num_nodes: int
    train_edges: np.ndarray
    val_edges: np.ndarray
    test_edges: np.ndarray
    val_negatives: np.ndarray
    test_negatives: np.ndarray
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("train_edges", "val_edges", "test_edges", "val_negatives", "test_negatives"):
            object.__setattr__(self, name, _pairs(getattr(self, name)))
        if len(self.val_negatives) != len(self.val_edges) or len(self.test_negatives) != len(self.test_edges):
            raise ContractViolationError("Each split needs exactly as many negatives as positives")

    def sections(self) -> List[Tuple[str, np.ndarray]]:
        return [
            ("TRAIN", self.train_edges),
            ("VAL", self.val_edges),
            ("VAL_NEG", self.val_negatives),
            ("TEST", self.test_edges),
            ("TEST_NEG", self.test_negatives),
        ]

    def same_as(self, other: "EdgeSplit") -> bool:
        return self.num_nodes == other.num_nodes and all(
            np.array_equal(mine, theirs) for (_, mine), (_, theirs) in zip(self.sections(), other.sections())
        )


@dataclass(frozen=True)
class MetricResult:
    auc: float
    ap: float
    n_pos: int
    n_neg: int

    def to_dict(self) -> Dict[str, float]:
        return {"auc": self.auc, "ap": self.ap, "n_pos": self.n_pos, "n_neg": self.n_neg}


def _split_size(num_edges: int, frac: float) -> int:
    return int(math.floor(round(num_edges * frac, 9)))


def _sample_negatives(num_nodes: int, edges: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Rejection-sample ``count`` distinct non-edges (u < v) of the full graph."""
    if count == 0:
        return np.zeros((0, 2), dtype=np.int64)
    existing = set((edges[:, 0] * num_nodes + edges[:, 1]).tolist())
    budget = NEGATIVE_ATTEMPTS_PER_NODE * num_nodes
    chosen: List[Tuple[int, int]] = []
    seen = set()
    attempts = 0
    while len(chosen) < count:
        if attempts >= budget:
            raise SamplingExhaustedError(
                f"Found only {len(chosen)} of {count} negative pairs after {attempts} attempts"
            )
        batch = min(max(2 * (count - len(chosen)), 64), budget - attempts)
        for u, v in rng.integers(0, num_nodes, size=(batch, 2)).tolist():
            attempts += 1
            if u == v:
                continue
            u, v = min(u, v), max(u, v)
            code = u * num_nodes + v
            if code in existing or code in seen:
                continue
            seen.add(code)
            chosen.append((u, v))
            if len(chosen) == count:
                break
    return _pairs(chosen)


def split_edges(
    dataset: GraphDataset,
    val_frac: float = VAL_FRAC,
    test_frac: float = TEST_FRAC,
    seed: int = 0,
) -> EdgeSplit:
    """Hold out floor(m·frac) validation and test edges; the rest is the training graph."""
    if val_frac < 0 or test_frac < 0 or not val_frac + test_frac < 1:
        raise ConfigError(f"Need 0 <= val_frac + test_frac < 1, got {val_frac} + {test_frac}")
    m = dataset.num_edges
    n_val, n_test = _split_size(m, val_frac), _split_size(m, test_frac)
    if (val_frac > 0 and n_val == 0) or (test_frac > 0 and n_test == 0):
        raise ConfigError(f"{dataset.name!r} has too few edges ({m}) for non-empty validation/test splits")

    rng = np.random.default_rng(seed)
    order = rng.permutation(m)
    val_idx = np.sort(order[:n_val])
    test_idx = np.sort(order[n_val : n_val + n_test])
    train_idx = np.sort(order[n_val + n_test :])
    negatives = _sample_negatives(dataset.num_nodes, dataset.edges, n_val + n_test, rng)

    split = EdgeSplit(
        num_nodes=dataset.num_nodes,
        train_edges=dataset.edges[train_idx],
        val_edges=dataset.edges[val_idx],
        test_edges=dataset.edges[test_idx],
        val_negatives=negatives[:n_val],
        test_negatives=negatives[n_val:],
        seed=seed,
    )
    logger.info(
        "[Split] %s: %d train / %d val / %d test edges (seed=%d)",
        dataset.name,
        len(split.train_edges),
        n_val,
        n_test,
        seed,
    )
    return split


def edge_logits(z: np.ndarray, pairs) -> np.ndarray:
    """Raw inner products z_u · z_v, one per pair."""
    pairs = _pairs(pairs)
    if pairs.size and (pairs.min() < 0 or pairs.max() >= z.shape[0]):
        raise ContractViolationError(f"Pair index out of range for {z.shape[0]} nodes")
    return np.einsum("ij,ij->i", z[pairs[:, 0]], z[pairs[:, 1]])


def score_edges(z: np.ndarray, pairs) -> np.ndarray:
    return expit(edge_logits(z, pairs))


def _check_scores(pos_scores: Sequence[float], neg_scores: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    pos = np.asarray(pos_scores, dtype=np.float64).ravel()
    neg = np.asarray(neg_scores, dtype=np.float64).ravel()
    if pos.size == 0 or neg.size == 0:
        raise ContractViolationError("Both positive and negative score lists must be non-empty")
    return pos, neg


def auc(pos_scores: Sequence[float], neg_scores: Sequence[float]) -> float:
    """Mann-Whitney AUC from average ranks; ties count one half."""
    pos, neg = _check_scores(pos_scores, neg_scores)
    ranks = rankdata(np.concatenate([pos, neg]))
    m, n = pos.size, neg.size
    u_statistic = ranks[:m].sum() - m * (m + 1) / 2.0
    return float(u_statistic / (m * n))


def average_precision(pos_scores: Sequence[float], neg_scores: Sequence[float]) -> float:
    """Mean precision at each positive, ranking negatives first among equal scores."""
    pos, neg = _check_scores(pos_scores, neg_scores)
    scores = np.concatenate([pos, neg])
    labels = np.concatenate([np.ones(pos.size, dtype=np.int64), np.zeros(neg.size, dtype=np.int64)])
    order = np.lexsort((labels, -scores))
    ranked = labels[order]
    hits = np.cumsum(ranked)
    positions = np.arange(1, ranked.size + 1)
    is_pos = ranked == 1
    precisions = (hits[is_pos] / positions[is_pos]).tolist()
    return math.fsum(precisions) / pos.size


def evaluate(z: np.ndarray, positives, negatives) -> MetricResult:
    """AUC and AP ranked on the logits; sigmoid scores tie once they round to 1.0."""
    pos_scores = edge_logits(z, positives)
    neg_scores = edge_logits(z, negatives)
    return MetricResult(
        auc=auc(pos_scores, neg_scores),
        ap=average_precision(pos_scores, neg_scores),
        n_pos=int(pos_scores.size),
        n_neg=int(neg_scores.size),
    )
