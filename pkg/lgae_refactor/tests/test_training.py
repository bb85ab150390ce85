
import math

import numpy as np
import pytest

from lgae_app.exceptions import ConfigError, ContractViolationError, NumericFailureError
from lgae_app.graph_core import GraphDataset, adjacency_from_edges, normalized_operator
from lgae_app.linkpred import EdgeSplit, split_edges
from lgae_app.models import LatentOutput, ModelConfig, forward, init_params, reconstruction_loss
from lgae_app.propagation import identity_features, propagate
from lgae_app.seeding import derive_seed
from lgae_app.training import (
    AdamState,
    TrainConfig,
    adam_step,
    backward,
    latent_gradients,
    objective,
    prepare_graph,
    train,
)


def _numeric_gradient(params, name, inputs, adjacency, operator, noise, h=1e-5):
    grad = np.zeros_like(params[name])
    for index in np.ndindex(*params[name].shape):
        shifted = []
        for step in (h, -h):
            nudged = params.copy()
            nudged.tensors[name][index] += step
            shifted.append(sum(objective(nudged, inputs, adjacency, operator, noise)))
        grad[index] = (shifted[0] - shifted[1]) / (2 * h)
    return grad


@pytest.mark.parametrize("variant", ["lgae", "lvgae", "gae", "vgae"])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_backward_matches_central_differences(variant, seed, cliques, cliques_operator):
    adjacency = adjacency_from_edges(cliques)
    config = ModelConfig(variant, 4, (5, 3), k=2, seed=seed)
    params = init_params(config)
    if config.variant.is_linear:
        inputs, operator = propagate(cliques_operator, cliques.features, 2), None
    else:
        inputs, operator = cliques.features, cliques_operator
    noise = None
    if config.variant.is_variational:
        noise = np.random.default_rng(seed).standard_normal((cliques.num_nodes, 3))

    _, cache = forward(params, inputs, operator, noise)
    grads = backward(params, cache, adjacency)
    for name in params.names():
        numeric = _numeric_gradient(params, name, inputs, adjacency, operator, noise)
        np.testing.assert_allclose(grads[name], numeric, rtol=1e-4, atol=1e-8, err_msg=name)


def test_kl_only_gradient_is_mean_over_nodes(cliques):
    rng = np.random.default_rng(0)
    mu = rng.normal(size=(cliques.num_nodes, 3))
    latent = LatentOutput(z=mu.copy(), mu=mu, log_sigma=np.zeros_like(mu))
    grads = latent_gradients(latent, adjacency_from_edges(cliques), recon_weight=0.0)
    np.testing.assert_allclose(grads.d_mu, mu / cliques.num_nodes)
    np.testing.assert_allclose(grads.d_log_sigma, 0.0)


def test_backward_needs_a_matching_cache(cliques):
    params = init_params(ModelConfig.for_variant("lgae", 4))
    with pytest.raises(ContractViolationError):
        backward(params, None, adjacency_from_edges(cliques))
    _, cache = forward(params.copy(), cliques.features)
    with pytest.raises(ContractViolationError):
        backward(params, cache, adjacency_from_edges(cliques))


def test_adam_first_steps_move_by_learning_rate():
    params = init_params(ModelConfig("lgae", 1, (1, 1)))
    config = TrainConfig(learning_rate=0.01)
    grads = {name: np.full_like(value, 0.5) for name, value in params.tensors.items()}
    state = AdamState.zeros(params)
    updated, state = adam_step(params, grads, state, 1, config)
    updated, state = adam_step(updated, grads, state, 2, config)
    assert state.step == 2
    for name in params.names():
        np.testing.assert_allclose(updated[name], params[name] - 0.02, rtol=1e-6, atol=1e-9)


def test_adam_rejects_non_finite_gradients():
    params = init_params(ModelConfig("lgae", 1, (1, 1)))
    grads = {name: np.zeros_like(value) for name, value in params.tensors.items()}
    grads["W0"] = np.array([[np.nan]])
    with pytest.raises(NumericFailureError) as excinfo:
        adam_step(params, grads, AdamState.zeros(params), 1, TrainConfig())
    assert excinfo.value.tensor == "W0"


def test_adam_steps_start_at_one():
    params = init_params(ModelConfig("lgae", 1, (1, 1)))
    with pytest.raises(ContractViolationError):
        adam_step(params, {}, AdamState.zeros(params), 0, TrainConfig())


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(epochs=0)
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ConfigError):
        TrainConfig(adam_beta1=1.0)


def test_two_node_graph_learns_its_edge():
    dataset = GraphDataset.from_pairs(2, [(0, 1)], name="pair")
    split = EdgeSplit(2, [[0, 1]], [], [], [], [])
    report = train(dataset, split, ModelConfig.for_variant("lgae", 2, 1), TrainConfig(epochs=50), featureless=True)
    assert report.final_reconstruction < math.log(2.0)
    assert report.reconstruction[-1] < report.reconstruction[0]
    assert report.test is None


def test_training_graph_excludes_held_out_edges(cliques):
    split = split_edges(cliques, seed=derive_seed(0, "split"))
    prepared = prepare_graph(cliques, split, "lgae", 2)
    for u, v in np.concatenate([split.val_edges, split.test_edges]).tolist():
        assert prepared.adjacency[u, v] == 0
    train_operator = normalized_operator(adjacency_from_edges(cliques.with_edges(split.train_edges)))
    np.testing.assert_array_equal(prepared.inputs, propagate(train_operator, cliques.features, 2))


def test_featureless_gcn_input_is_identity(cliques):
    split = split_edges(cliques, seed=1)
    prepared = prepare_graph(cliques, split, "gae", 2, featureless=True)
    np.testing.assert_array_equal(prepared.inputs, identity_features(cliques.num_nodes))


def test_split_must_cover_dataset(cliques, triangle):
    split = split_edges(cliques, seed=1)
    with pytest.raises(ContractViolationError):
        prepare_graph(triangle, split, "lgae", 1, featureless=True)


@pytest.mark.parametrize("variant", ["lgae", "lvgae", "gae", "vgae"])
def test_training_is_deterministic(variant, cliques):
    split = split_edges(cliques, seed=3)
    config = ModelConfig.for_variant(variant, 4, 2, seed=11)
    train_config = TrainConfig(epochs=15, seed=12, eval_every=5)
    first = train(cliques, split, config, train_config)
    second = train(cliques, split, config, train_config)
    assert first.reconstruction == second.reconstruction
    assert first.kl == second.kl
    assert first.to_dict() == second.to_dict()
    for name in first.params.names():
        np.testing.assert_array_equal(first.params[name], second.params[name])
    assert [entry["epoch"] for entry in first.validation] == [5, 10, 15]


def test_linear_autoencoder_separates_communities(cliques):
    split = split_edges(cliques, seed=derive_seed(0, "split"))
    config = ModelConfig.for_variant("lgae", cliques.num_nodes, 1, seed=derive_seed(0, "init"))
    report = train(cliques, split, config, TrainConfig(epochs=100), featureless=True)
    assert report.test.auc > 0.75
    assert report.test.n_pos == len(split.test_edges)


def test_epoch_callback_sees_every_epoch(cliques):
    split = split_edges(cliques, seed=2)
    events = []
    train(
        cliques,
        split,
        ModelConfig.for_variant("lvgae", 4, 2),
        TrainConfig(epochs=6, eval_every=3),
        on_epoch=events.append,
    )
    assert [event["epoch"] for event in events] == list(range(1, 7))
    assert "val_auc" in events[2] and "val_auc" not in events[0]
    assert events[0]["kl"] > 0.0


def test_report_omits_wall_time_unless_asked(cliques):
    report = train(cliques, split_edges(cliques, seed=2), ModelConfig.for_variant("lgae", 4), TrainConfig(epochs=2))
    assert "wall_time_seconds" not in report.to_dict()
    assert report.to_dict(include_timing=True)["wall_time_seconds"] >= 0.0
    assert report.to_dict()["provenance"]["weight_decay"] == 0.0


def test_seed_derivation_separates_stages():
    assert derive_seed(0, "split") == derive_seed(0, "split")
    assert len({derive_seed(0, "split"), derive_seed(0, "init"), derive_seed(0, "noise"), derive_seed(1, "init")}) == 4
    assert 0 <= derive_seed(123, "noise") < 2**64


@pytest.mark.parametrize("variant", ["lgae", "lvgae", "gae", "vgae"])
def test_training_lowers_the_reconstruction_loss(variant, cliques):
    split = split_edges(cliques, seed=derive_seed(0, "split"))
    prepared = prepare_graph(cliques, split, variant, 2)
    improved = 0
    for seed in range(10):
        config = ModelConfig.for_variant(variant, 4, 2, seed=derive_seed(seed, "init"))
        untrained = forward(init_params(config), prepared.inputs, prepared.operator)[0].readout
        report = train(
            cliques,
            split,
            config,
            TrainConfig(epochs=200, seed=derive_seed(seed, "noise"), eval_every=0),
            prepared=prepared,
        )
        improved += report.final_reconstruction < reconstruction_loss(untrained, prepared.adjacency)
    assert improved >= 9
