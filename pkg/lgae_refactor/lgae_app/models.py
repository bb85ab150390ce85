
"""Encoders, the inner-product decoder, losses and the trainable-parameter audit.

Both encoder families share one layer stack: every layer but the last applies
ReLU, the last one is the latent head (duplicated into mu / log-sigma heads
for the variational variants). Linear variants consume a pre-smoothed X̄ and
carry biases; GCN variants multiply by S inside every layer and carry none.
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .config import DEFAULT_K, LOSS_BLOCK_ROWS, MAX_GCN_LAYERS, MAX_HOPS
from .exceptions import ConfigError, DegenerateGraphError, NumericFailureError, ShapeMismatchError
from .graph_core import spmm

LINEAR_HIDDEN_DIMS = (32, 16)
LATENT_DIM = 16
PARAM_KS = (1, 2, 3, 7)


class Variant(str, Enum):
    LGAE = "lgae"
    LVGAE = "lvgae"
    GAE = "gae"
    VGAE = "vgae"

    @property
    def is_linear(self) -> bool:
        return self in (Variant.LGAE, Variant.LVGAE)

    @property
    def is_variational(self) -> bool:
        return self in (Variant.LVGAE, Variant.VGAE)

    @property
    def label(self) -> str:
        return {"lgae": "L-GAE", "lvgae": "L-VGAE", "gae": "GAE", "vgae": "VGAE"}[self.value]

    @classmethod
    def parse(cls, value: "str | Variant") -> "Variant":
        try:
            return cls(str(value.value if isinstance(value, Variant) else value).lower())
        except ValueError as exc:
            choices = ", ".join(v.value for v in cls)
            raise ConfigError(f"Unknown variant {value!r}; expected one of {choices}") from exc


def hidden_progression(k: int) -> Tuple[int, ...]:
    """Base-2 GCN widths ending at the latent size: k=3 -> (64, 32, 16)."""
    if k < 1:
        raise ConfigError(f"A GCN encoder needs at least one layer, got k={k}")
    return tuple(LATENT_DIM * 2 ** (k - 1 - i) for i in range(k))


@dataclass(frozen=True)
class ModelConfig:
    variant: Variant
    input_dim: int
    hidden_dims: Tuple[int, ...] = LINEAR_HIDDEN_DIMS
    k: int = DEFAULT_K
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1:
            raise ConfigError(f"input_dim must be positive, got {self.input_dim}")
        if not self.hidden_dims or min(self.hidden_dims) < 1:
            raise ConfigError(f"hidden_dims must be non-empty and positive, got {self.hidden_dims}")
        if self.k < 0:
            raise ConfigError(f"k must be non-negative, got {self.k}")
        if self.variant.is_linear:
            if self.k > MAX_HOPS:
                raise ConfigError(f"k={self.k} exceeds the propagation cap of {MAX_HOPS}")
        else:
            if self.k > MAX_GCN_LAYERS:
                raise ConfigError(f"k={self.k} exceeds the supported GCN depth of {MAX_GCN_LAYERS}")
            if len(self.hidden_dims) != self.k:
                raise ConfigError(
                    f"{self.variant.label} needs one GCN layer per hop: k={self.k} "
                    f"but hidden_dims={self.hidden_dims}"
                )

    @classmethod
    def for_variant(cls, variant: "str | Variant", input_dim: int, k: int = DEFAULT_K, seed: int = 0) -> "ModelConfig":
        variant = Variant.parse(variant)
        hidden = LINEAR_HIDDEN_DIMS if variant.is_linear else hidden_progression(k)
        return cls(variant, input_dim, hidden, k, seed)

    @property
    def latent_dim(self) -> int:
        return self.hidden_dims[-1]

    def to_dict(self) -> Dict[str, object]:
        return {
            "variant": self.variant.value,
            "input_dim": self.input_dim,
            "hidden_dims": list(self.hidden_dims),
            "k": self.k,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: Dict[str, object]) -> "ModelConfig":
        return cls(
            Variant.parse(doc["variant"]),
            int(doc["input_dim"]),
            tuple(doc["hidden_dims"]),
            int(doc["k"]),
            int(doc["seed"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _head_suffixes(config: ModelConfig) -> Tuple[str, ...]:
    return ("_mu", "_logsigma") if config.variant.is_variational else ("",)


def tensor_shapes(config: ModelConfig) -> List[Tuple[str, Tuple[int, ...]]]:
    """Ordered (name, shape) list of every trainable tensor."""
    dims = (config.input_dim,) + config.hidden_dims
    last = len(config.hidden_dims) - 1
    with_bias = config.variant.is_linear
    shapes: List[Tuple[str, Tuple[int, ...]]] = []
    for i in range(last):
        shapes.append((f"W{i}", (dims[i], dims[i + 1])))
        if with_bias:
            shapes.append((f"b{i}", (dims[i + 1],)))
    for suffix in _head_suffixes(config):
        shapes.append((f"W{last}{suffix}", (dims[last], dims[last + 1])))
        if with_bias:
            shapes.append((f"b{last}{suffix}", (dims[last + 1],)))
    return shapes


@dataclass(frozen=True, eq=False)
class ModelParams:
    config: ModelConfig
    tensors: Dict[str, np.ndarray]

    def __post_init__(self) -> None:
        expected = tensor_shapes(self.config)
        if [name for name, _ in expected] != list(self.tensors):
            raise ShapeMismatchError(
                f"Parameter names {list(self.tensors)} do not match {[n for n, _ in expected]}"
            )
        for name, shape in expected:
            if self.tensors[name].shape != shape:
                raise ShapeMismatchError(f"{name} has shape {self.tensors[name].shape}, expected {shape}")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self) -> List[str]:
        return list(self.tensors)

    def replace(self, tensors: Dict[str, np.ndarray]) -> "ModelParams":
        return ModelParams(self.config, {name: tensors[name] for name in self.tensors})

    def copy(self) -> "ModelParams":
        return self.replace({name: value.copy() for name, value in self.tensors.items()})


def init_params(config: ModelConfig) -> ModelParams:
    """Glorot-uniform weights, zero biases; draws follow tensor order."""
    rng = np.random.default_rng(config.seed)
    tensors: Dict[str, np.ndarray] = {}
    for name, shape in tensor_shapes(config):
        if name.startswith("b"):
            tensors[name] = np.zeros(shape, dtype=np.float64)
        else:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            tensors[name] = rng.uniform(-limit, limit, size=shape)
    return ModelParams(config, tensors)


def param_count(config: ModelConfig) -> int:
    if config.k > MAX_GCN_LAYERS:
        raise ConfigError(f"Parameter audit supports k <= {MAX_GCN_LAYERS}, got {config.k}")
    return int(sum(np.prod(shape) for _, shape in tensor_shapes(config)))


@dataclass(frozen=True, eq=False)
class LatentOutput:
    z: np.ndarray
    mu: Optional[np.ndarray] = None
    log_sigma: Optional[np.ndarray] = None
    noise: Optional[np.ndarray] = None

    @property
    def readout(self) -> np.ndarray:
        """Deterministic embedding for scoring: the posterior mean when there is one."""
        return self.mu if self.mu is not None else self.z


@dataclass(eq=False)
class ForwardCache:
    """Activations kept for backprop: inputs[i] feeds layer i, pre[i] is layer i before ReLU."""

    params: ModelParams
    operator: Optional[sp.csr_matrix]
    inputs: List[np.ndarray] = field(default_factory=list)
    pre: List[np.ndarray] = field(default_factory=list)
    latent: Optional[LatentOutput] = None


def reparameterize(mu: np.ndarray, log_sigma: np.ndarray, noise: np.ndarray) -> np.ndarray:
    if not (mu.shape == log_sigma.shape == noise.shape):
        raise ShapeMismatchError(f"mu {mu.shape}, log_sigma {log_sigma.shape}, noise {noise.shape} differ")
    return mu + np.exp(log_sigma) * noise


def _layer(params: ModelParams, name: str, hidden: np.ndarray, operator: Optional[sp.spmatrix]) -> np.ndarray:
    out = hidden @ params[f"W{name}"]
    if operator is not None:
        return spmm(operator, out)
    return out + params[f"b{name}"]


def _require_finite(name: str, value: np.ndarray) -> None:
    if not np.isfinite(value).all():
        raise NumericFailureError(f"Encoder output {name} is not finite", tensor=name)


def forward(
    params: ModelParams,
    inputs: np.ndarray,
    operator: Optional[sp.spmatrix] = None,
    noise: Optional[np.ndarray] = None,
) -> Tuple[LatentOutput, ForwardCache]:
    """Run the encoder stack and keep what backward needs.

    ``operator`` must be given for GCN variants and omitted for linear ones.
    With ``noise=None`` a variational encoder returns z = mu.
    """
    config = params.config
    if inputs.ndim != 2 or inputs.shape[1] != config.input_dim:
        raise ShapeMismatchError(f"Encoder expects {config.input_dim} input columns, got {inputs.shape}")
    if config.variant.is_linear:
        operator = None
    else:
        if operator is None:
            raise ShapeMismatchError(f"{config.variant.label} needs the propagation operator S")
        if operator.shape != (inputs.shape[0], inputs.shape[0]):
            raise ShapeMismatchError(f"S is {operator.shape} but inputs have {inputs.shape[0]} rows")

    cache = ForwardCache(params=params, operator=operator)
    hidden = np.asarray(inputs, dtype=np.float64)
    last = len(config.hidden_dims) - 1
    for i in range(last):
        cache.inputs.append(hidden)
        pre = _layer(params, str(i), hidden, operator)
        cache.pre.append(pre)
        hidden = np.maximum(pre, 0.0)
    cache.inputs.append(hidden)

    if config.variant.is_variational:
        mu = _layer(params, f"{last}_mu", hidden, operator)
        log_sigma = _layer(params, f"{last}_logsigma", hidden, operator)
        _require_finite("mu", mu)
        _require_finite("log_sigma", log_sigma)
        if noise is None:
            z = mu.copy()
        else:
            z = reparameterize(mu, log_sigma, noise)
        latent = LatentOutput(z=z, mu=mu, log_sigma=log_sigma, noise=noise)
    else:
        latent = LatentOutput(z=_layer(params, str(last), hidden, operator))
    _require_finite("z", latent.z)
    cache.latent = latent
    return latent, cache


def encode_linear(x_bar: np.ndarray, params: ModelParams, noise: Optional[np.ndarray] = None) -> LatentOutput:
    if not params.config.variant.is_linear:
        raise ShapeMismatchError(f"{params.config.variant.label} is not a linear encoder")
    return forward(params, x_bar, None, noise)[0]


def encode_gcn(
    features: np.ndarray,
    operator: sp.spmatrix,
    params: ModelParams,
    noise: Optional[np.ndarray] = None,
) -> LatentOutput:
    if params.config.variant.is_linear:
        raise ShapeMismatchError(f"{params.config.variant.label} is not a GCN encoder")
    return forward(params, features, operator, noise)[0]


def decode_inner_product(z: np.ndarray) -> np.ndarray:
    """Â[i, j] = sigmoid(z_i · z_j).

    In float64 the sigmoid rounds to exactly 1.0 once a logit passes about 37
    and to 0.0 below about -745; rank on the logits when that matters.
    """
    return expit(z @ z.T)


def _target_rows(adjacency: sp.csr_matrix, start: int, stop: int) -> np.ndarray:
    target = (adjacency[start:stop].toarray() != 0).astype(np.float64)
    target[np.arange(stop - start), np.arange(start, stop)] = 1.0
    return target


def reconstruction_terms(
    z: np.ndarray,
    adjacency: sp.spmatrix,
    with_grad: bool = False,
    block_rows: int = LOSS_BLOCK_ROWS,
) -> Tuple[float, Optional[np.ndarray]]:
    """Weighted BCE of sigmoid(z_i · z_j) against A + I, and optionally d loss / d z.

    The n x n logits are visited in row blocks of ``block_rows``.
    """
    n = z.shape[0]
    if adjacency.shape != (n, n):
        raise ShapeMismatchError(f"Adjacency is {adjacency.shape} but z has {n} rows")
    adjacency = sp.csr_matrix(adjacency)
    total = n * n
    positives = int(np.count_nonzero(adjacency.data) - np.count_nonzero(adjacency.diagonal()) + n)
    if n == 0 or positives == 0:
        raise DegenerateGraphError("Reconstruction target has no positive pairs")
    negatives = total - positives
    if negatives == 0:
        pos_weight, norm = 1.0, 1.0
    else:
        pos_weight = negatives / positives
        norm = total / (2.0 * negatives)

    loss_sum = 0.0
    grad = np.zeros_like(z) if with_grad else None
    for start in range(0, n, block_rows):
        stop = min(start + block_rows, n)
        logits = z[start:stop] @ z.T
        target = _target_rows(adjacency, start, stop)
        weights = np.where(target > 0, pos_weight, 1.0)
        bce = np.maximum(logits, 0.0) - logits * target + np.log1p(np.exp(-np.abs(logits)))
        loss_sum += float(np.sum(weights * bce))
        if grad is not None:
            d_logits = weights * (expit(logits) - target) * (norm / total)
            grad[start:stop] += d_logits @ z
            grad += d_logits.T @ z[start:stop]
    return norm * loss_sum / total, grad


def reconstruction_loss(z: np.ndarray, adjacency: sp.spmatrix, block_rows: int = LOSS_BLOCK_ROWS) -> float:
    return reconstruction_terms(z, adjacency, with_grad=False, block_rows=block_rows)[0]


def kl_divergence(mu: np.ndarray, log_sigma: np.ndarray) -> float:
    if mu.shape != log_sigma.shape:
        raise ShapeMismatchError(f"mu {mu.shape} and log_sigma {log_sigma.shape} differ")
    n = mu.shape[0]
    return float(-0.5 / n * np.sum(1.0 + 2.0 * log_sigma - mu**2 - np.exp(2.0 * log_sigma)))


def param_table(feature_dim: int, variants: Sequence[Variant], ks: Sequence[int]) -> Dict[Variant, Dict[int, int]]:
    return {
        variant: {k: param_count(ModelConfig.for_variant(variant, feature_dim, k)) for k in ks}
        for variant in variants
    }
