
"""Manual backprop, Adam and the full-batch training loop."""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from tqdm import tqdm

from .config import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPS,
    DEFAULT_EPOCHS,
    EVAL_EVERY,
    LEARNING_RATE,
    LOSS_BLOCK_ROWS,
)
from .exceptions import ConfigError, ContractViolationError, NumericFailureError, ShapeMismatchError
from .graph_core import GraphDataset, adjacency_from_edges, normalized_operator, spmm
from .linkpred import EdgeSplit, MetricResult, evaluate
from .models import (
    ForwardCache,
    LatentOutput,
    ModelConfig,
    ModelParams,
    Variant,
    forward,
    init_params,
    kl_divergence,
    reconstruction_loss,
    reconstruction_terms,
)
from .propagation import PropagationConfig, identity_features, smoothed_features

logger = logging.getLogger(__name__)

EpochCallback = Callable[[Dict[str, object]], None]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = DEFAULT_EPOCHS
    learning_rate: float = LEARNING_RATE
    adam_beta1: float = ADAM_BETA1
    adam_beta2: float = ADAM_BETA2
    adam_eps: float = ADAM_EPS
    seed: int = 0
    eval_every: int = EVAL_EVERY
    block_rows: int = LOSS_BLOCK_ROWS
    progress: bool = False

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ConfigError(f"epochs must be at least 1, got {self.epochs}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        for name in ("adam_beta1", "adam_beta2"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ConfigError(f"{name} must lie in (0, 1), got {value}")
        if not self.adam_eps > 0:
            raise ConfigError(f"adam_eps must be positive, got {self.adam_eps}")
        if self.eval_every < 0:
            raise ConfigError(f"eval_every must be non-negative, got {self.eval_every}")
        if self.block_rows < 1:
            raise ConfigError(f"block_rows must be positive, got {self.block_rows}")


@dataclass(frozen=True, eq=False)
class LatentGradients:
    reconstruction: float
    kl: float
    d_z: np.ndarray
    d_mu: Optional[np.ndarray] = None
    d_log_sigma: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class Gradients:
    tensors: Dict[str, np.ndarray]
    reconstruction: float
    kl: float

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    @property
    def loss(self) -> float:
        return self.reconstruction + self.kl


def latent_gradients(
    latent: LatentOutput,
    adjacency: sp.spmatrix,
    recon_weight: float = 1.0,
    block_rows: int = LOSS_BLOCK_ROWS,
) -> LatentGradients:
    """Loss gradient w.r.t. z, and through the reparameterization w.r.t. mu and log-sigma."""
    recon, d_recon = reconstruction_terms(latent.z, adjacency, with_grad=True, block_rows=block_rows)
    d_z = recon_weight * d_recon
    if latent.mu is None:
        return LatentGradients(recon, 0.0, d_z)

    n = latent.mu.shape[0]
    sigma = np.exp(latent.log_sigma)
    d_mu = d_z + latent.mu / n
    d_log_sigma = (sigma**2 - 1.0) / n
    if latent.noise is not None:
        d_log_sigma = d_log_sigma + d_z * sigma * latent.noise
    kl = kl_divergence(latent.mu, latent.log_sigma)
    return LatentGradients(recon, kl, d_z, d_mu, d_log_sigma)


def _layer_backward(
    params: ModelParams,
    name: str,
    layer_input: np.ndarray,
    d_out: np.ndarray,
    operator: Optional[sp.spmatrix],
    grads: Dict[str, np.ndarray],
    need_input_grad: bool = True,
) -> Optional[np.ndarray]:
    if operator is not None:
        d_linear = spmm(operator.T, d_out)
    else:
        d_linear = d_out
        grads[f"b{name}"] = d_out.sum(axis=0)
    grads[f"W{name}"] = layer_input.T @ d_linear
    if not need_input_grad:
        return None
    return d_linear @ params[f"W{name}"].T


def backward(
    params: ModelParams,
    cache: Optional[ForwardCache],
    adjacency: sp.spmatrix,
    recon_weight: float = 1.0,
    block_rows: int = LOSS_BLOCK_ROWS,
) -> Gradients:
    """Analytic gradients of reconstruction (+ KL) w.r.t. every tensor in ``params``."""
    if cache is None or cache.latent is None or not cache.inputs:
        raise ContractViolationError("backward needs the cache of a forward pass")
    if cache.params is not params:
        raise ContractViolationError("Forward cache was produced by different parameters")

    config = params.config
    latent_grads = latent_gradients(cache.latent, adjacency, recon_weight, block_rows)
    last = len(config.hidden_dims) - 1
    grads: Dict[str, np.ndarray] = {}

    if config.variant.is_variational:
        heads = (("_mu", latent_grads.d_mu), ("_logsigma", latent_grads.d_log_sigma))
    else:
        heads = (("", latent_grads.d_z),)
    d_hidden = np.zeros_like(cache.inputs[last]) if last > 0 else None
    for suffix, d_out in heads:
        d_input = _layer_backward(
            params, f"{last}{suffix}", cache.inputs[last], d_out, cache.operator, grads, last > 0
        )
        if d_hidden is not None:
            d_hidden += d_input

    for i in reversed(range(last)):
        d_pre = d_hidden * (cache.pre[i] > 0)
        d_hidden = _layer_backward(params, str(i), cache.inputs[i], d_pre, cache.operator, grads, i > 0)

    ordered = {name: grads[name] for name in params.names()}
    return Gradients(ordered, latent_grads.reconstruction, latent_grads.kl)


def objective(
    params: ModelParams,
    inputs: np.ndarray,
    adjacency: sp.spmatrix,
    operator: Optional[sp.spmatrix] = None,
    noise: Optional[np.ndarray] = None,
    block_rows: int = LOSS_BLOCK_ROWS,
) -> Tuple[float, float]:
    """(reconstruction, KL) at ``params``; KL is 0 for deterministic variants."""
    latent, _ = forward(params, inputs, operator, noise)
    recon = reconstruction_loss(latent.z, adjacency, block_rows)
    kl = kl_divergence(latent.mu, latent.log_sigma) if latent.mu is not None else 0.0
    return recon, kl


@dataclass
class AdamState:
    first: Dict[str, np.ndarray]
    second: Dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros(cls, params: ModelParams) -> "AdamState":
        return cls(
            {name: np.zeros_like(value) for name, value in params.tensors.items()},
            {name: np.zeros_like(value) for name, value in params.tensors.items()},
        )


def adam_step(
    params: ModelParams,
    grads: "Gradients | Dict[str, np.ndarray]",
    state: AdamState,
    t: int,
    config: TrainConfig,
) -> Tuple[ModelParams, AdamState]:
    if t < 1:
        raise ContractViolationError(f"Adam step index starts at 1, got {t}")
    tensors = grads.tensors if isinstance(grads, Gradients) else grads
    for name in params.names():
        if tensors[name].shape != params[name].shape:
            raise ShapeMismatchError(f"Gradient {name} has shape {tensors[name].shape}, expected {params[name].shape}")
        if not np.isfinite(tensors[name]).all():
            raise NumericFailureError(f"Gradient of {name} is not finite at step {t}", tensor=name)

    b1, b2 = config.adam_beta1, config.adam_beta2
    first, second, updated = {}, {}, {}
    for name in params.names():
        g = tensors[name]
        first[name] = b1 * state.first[name] + (1.0 - b1) * g
        second[name] = b2 * state.second[name] + (1.0 - b2) * g * g
        m_hat = first[name] / (1.0 - b1**t)
        v_hat = second[name] / (1.0 - b2**t)
        updated[name] = params[name] - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return params.replace(updated), AdamState(first, second, t)


@dataclass(eq=False)
class TrainReport:
    dataset: str
    model: Dict[str, object]
    train_config: Dict[str, object]
    featureless: bool
    reconstruction: List[float] = field(default_factory=list)
    kl: List[float] = field(default_factory=list)
    validation: List[Dict[str, object]] = field(default_factory=list)
    final_reconstruction: Optional[float] = None
    test: Optional[MetricResult] = None
    checkpoint: Optional[str] = None
    wall_time_seconds: float = 0.0
    params: Optional[ModelParams] = field(default=None, repr=False)

    @property
    def provenance(self) -> Dict[str, object]:
        return {
            "learning_rate": self.train_config["learning_rate"],
            "weight_decay": 0.0,
            "model_selection": "none; validation metrics are recorded only",
            "readout": "posterior mean for variational variants",
        }

    def to_dict(self, include_timing: bool = False) -> Dict[str, object]:
        doc: Dict[str, object] = {
            "dataset": self.dataset,
            "model": self.model,
            "train_config": self.train_config,
            "featureless": self.featureless,
            "epochs_recorded": len(self.reconstruction),
            "losses": {"reconstruction": self.reconstruction, "kl": self.kl},
            "final_reconstruction": self.final_reconstruction,
            "validation": self.validation,
            "test": self.test.to_dict() if self.test else None,
            "checkpoint": self.checkpoint,
            "provenance": self.provenance,
        }
        if include_timing:
            doc["wall_time_seconds"] = self.wall_time_seconds
        return doc


@dataclass(frozen=True, eq=False)
class PreparedGraph:
    """Training-graph operators and the encoder input matrix."""

    adjacency: sp.csr_matrix
    operator: sp.csr_matrix
    inputs: np.ndarray


def check_split(dataset: GraphDataset, split: EdgeSplit) -> None:
    if split.num_nodes != dataset.num_nodes:
        raise ContractViolationError(
            f"Split covers {split.num_nodes} nodes but dataset {dataset.name!r} has {dataset.num_nodes}"
        )
    covered = len(split.train_edges) + len(split.val_edges) + len(split.test_edges)
    if covered != dataset.num_edges:
        raise ContractViolationError(
            f"Split holds {covered} positive edges but dataset {dataset.name!r} has {dataset.num_edges}"
        )


def prepare_graph(
    dataset: GraphDataset,
    split: EdgeSplit,
    variant: Variant,
    k: int,
    featureless: bool = False,
    cache_dir: Optional[Path] = None,
) -> PreparedGraph:
    """Build A_train and S_train, and the encoder input: X̄ = S_train^k X (or I) for L-*, X (or I) for GCN."""
    check_split(dataset, split)
    train_graph = dataset.with_edges(split.train_edges, name=f"{dataset.name}-train")
    adjacency = adjacency_from_edges(train_graph)
    operator = normalized_operator(adjacency)
    if Variant.parse(variant).is_linear:
        prop_config = PropagationConfig(k, featureless)
        inputs = smoothed_features(train_graph, operator, prop_config, cache_dir)
    elif featureless:
        inputs = identity_features(dataset.num_nodes)
    else:
        if dataset.features is None:
            raise ConfigError(f"Dataset {dataset.name!r} has no features; use the featureless stream")
        inputs = dataset.features
    return PreparedGraph(adjacency, operator, inputs)


def _embed(params: ModelParams, prepared: PreparedGraph) -> np.ndarray:
    return forward(params, prepared.inputs, prepared.operator)[0].readout


def train(
    dataset: GraphDataset,
    split: EdgeSplit,
    model_config: ModelConfig,
    train_config: TrainConfig,
    featureless: bool = False,
    prepared: Optional[PreparedGraph] = None,
    cache_dir: Optional[Path] = None,
    on_epoch: Optional[EpochCallback] = None,
) -> TrainReport:
    """Full-batch training on the train edges only; deterministic given both seeds."""
    started = time.perf_counter()
    check_split(dataset, split)
    if prepared is None:
        prepared = prepare_graph(dataset, split, model_config.variant, model_config.k, featureless, cache_dir)
    if prepared.inputs.shape[1] != model_config.input_dim:
        raise ConfigError(
            f"Model input_dim={model_config.input_dim} but inputs have {prepared.inputs.shape[1]} columns"
        )

    variant = model_config.variant
    params = init_params(model_config)
    state = AdamState.zeros(params)
    noise_rng = np.random.default_rng(train_config.seed)
    n = dataset.num_nodes
    report = TrainReport(
        dataset=dataset.name,
        model=model_config.to_dict(),
        train_config={
            "epochs": train_config.epochs,
            "learning_rate": train_config.learning_rate,
            "adam_beta1": train_config.adam_beta1,
            "adam_beta2": train_config.adam_beta2,
            "adam_eps": train_config.adam_eps,
            "seed": train_config.seed,
            "eval_every": train_config.eval_every,
        },
        featureless=featureless,
    )

    epochs = tqdm(
        range(1, train_config.epochs + 1),
        desc=f"{variant.label} {dataset.name}",
        disable=not train_config.progress,
        leave=False,
    )
    for epoch in epochs:
        noise = noise_rng.standard_normal((n, model_config.latent_dim)) if variant.is_variational else None
        _, cache = forward(params, prepared.inputs, prepared.operator, noise)
        grads = backward(params, cache, prepared.adjacency, block_rows=train_config.block_rows)
        params, state = adam_step(params, grads, state, epoch, train_config)
        report.reconstruction.append(grads.reconstruction)
        report.kl.append(grads.kl)
        logger.debug("[Train] epoch %d recon=%.6f kl=%.6f", epoch, grads.reconstruction, grads.kl)

        event: Dict[str, object] = {"epoch": epoch, "reconstruction": grads.reconstruction, "kl": grads.kl}
        if train_config.eval_every and epoch % train_config.eval_every == 0 and len(split.val_edges):
            metrics = evaluate(_embed(params, prepared), split.val_edges, split.val_negatives)
            report.validation.append({"epoch": epoch, "auc": metrics.auc, "ap": metrics.ap})
            event.update(val_auc=metrics.auc, val_ap=metrics.ap)
            logger.info("[Train] %s epoch %d val_auc=%.4f val_ap=%.4f", variant.label, epoch, metrics.auc, metrics.ap)
        if on_epoch is not None:
            on_epoch(event)

    readout = _embed(params, prepared)
    report.final_reconstruction = reconstruction_loss(readout, prepared.adjacency, train_config.block_rows)
    if len(split.test_edges):
        report.test = evaluate(readout, split.test_edges, split.test_negatives)
        logger.info("[Train] %s test_auc=%.4f test_ap=%.4f", variant.label, report.test.auc, report.test.ap)
    report.params = params
    report.wall_time_seconds = time.perf_counter() - started
    return report
