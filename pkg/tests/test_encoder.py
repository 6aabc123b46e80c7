import numpy as np
import pytest

from lamp.services.autodiff import Parameter, Tensor
from lamp.services.encoder import (
    Encoder,
    GinLayer,
    ProjectionHead,
    Readout,
    encode,
    init_encoder,
    init_head,
    project,
    readout,
)
from lamp.services.exceptions import ArgumentError, ShapeError
from lamp.services.graph_core import Graph, make_batch
from lamp.services.pruning import magnitude_mask, soft_filter_mask


def random_encoder(input_dim=3, hidden=6, layers=3, seed=0):
    return init_encoder(input_dim, hidden, layers, np.random.default_rng(seed))


def identity_encoder(layers=2):
    def layer():
        return GinLayer(
            Parameter([[1.0]]), Parameter([[0.0]]), Parameter([[1.0]]), Parameter([[0.0]])
        )

    return Encoder([layer() for _ in range(layers)], input_dim=1, hidden_dim=1)


def test_encoder_needs_two_layers():
    with pytest.raises(ArgumentError):
        random_encoder(layers=1)


def test_parameter_names_and_prunable_weights():
    encoder = random_encoder(layers=2)
    names = [name for name, _ in encoder.named_parameters()]
    assert names[:4] == [
        "encoder.layers.0.w1",
        "encoder.layers.0.b1",
        "encoder.layers.0.w2",
        "encoder.layers.0.b2",
    ]
    assert sorted(encoder.prunable_weights()) == [
        "encoder.layers.0.w1",
        "encoder.layers.0.w2",
        "encoder.layers.1.w1",
        "encoder.layers.1.w2",
    ]
    assert encoder.layers[0].w1.shape == (6, 3)


def test_glorot_limits_and_zero_biases():
    encoder = random_encoder(input_dim=10, hidden=32)
    limit = np.sqrt(6.0 / (10 + 32))
    assert np.abs(encoder.layers[0].w1.value).max() <= limit
    assert not encoder.layers[0].b1.value.any()


def test_single_node_passes_through_identity_layers():
    batch = make_batch([Graph.build(1, features=[[2.5]])])
    out = encode(identity_encoder(layers=3), batch)
    assert out.value.tolist() == [[2.5]]


def test_gin_aggregates_self_plus_neighbors():
    batch = make_batch([Graph.build(3, [(0, 1), (1, 2)], features=[[1.0], [2.0], [4.0]])])
    out = encode(identity_encoder(layers=2), batch)
    # layer 1: [3, 7, 6]; layer 2: [10, 16, 13]
    assert out.value[:, 0].tolist() == [10.0, 16.0, 13.0]


def test_zero_weights_give_zero_embeddings(graph_factory):
    encoder = random_encoder()
    for param in encoder.parameters():
        param.value[...] = 0.0
    out = encode(encoder, make_batch(graph_factory.build_batch(3)))
    assert not out.value.any()


def test_feature_dim_mismatch_is_a_shape_error(graph_factory):
    with pytest.raises(ShapeError):
        encode(random_encoder(input_dim=4), make_batch([graph_factory()]))


def test_all_ones_mask_matches_dense(graph_factory):
    encoder = random_encoder()
    batch = make_batch(graph_factory.build_batch(4))
    mask = magnitude_mask(encoder.prunable_weights(), 0.0)
    assert np.array_equal(encode(encoder, batch, mask).value, encode(encoder, batch).value)


def test_masked_entries_do_not_reach_the_output(graph_factory):
    encoder = random_encoder()
    batch = make_batch(graph_factory.build_batch(3))
    mask = soft_filter_mask(encoder.prunable_weights(), 0.5)
    before = encode(encoder, batch, mask).value
    row = int(np.flatnonzero(mask["encoder.layers.1.w1"][:, 0] == 0)[0])
    encoder.layers[1].w1.value[row] += 100.0
    assert np.array_equal(encode(encoder, batch, mask).value, before)
    assert not np.array_equal(encode(encoder, batch).value, before)


def test_permutation_equivariance(graph_factory):
    encoder = random_encoder()
    rng = np.random.default_rng(4)
    for _ in range(5):
        graph = graph_factory()
        perm = rng.permutation(graph.node_count)
        original = encode(encoder, make_batch([graph])).value
        permuted = encode(encoder, make_batch([graph.relabel(perm)])).value
        assert np.allclose(permuted[perm], original, atol=1e-12)


def test_batching_invariance(graph_factory):
    encoder = random_encoder()
    graphs = graph_factory.build_batch(5)
    mask = magnitude_mask(encoder.prunable_weights(), 0.3)
    together = encode(encoder, make_batch(graphs), mask).value
    apart = np.concatenate([encode(encoder, make_batch([g]), mask).value for g in graphs])
    assert np.allclose(together, apart, atol=1e-12)


def test_readout_sum_and_mean():
    nodes = Tensor(np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]))
    ids = np.array([0, 0, 1])
    assert readout(nodes, ids).value.tolist() == [[4.0, 6.0], [5.0, 6.0]]
    assert readout(nodes, ids, Readout.MEAN).value.tolist() == [[2.0, 3.0], [5.0, 6.0]]
    with pytest.raises(ArgumentError):
        readout(nodes, ids, "max")


def test_readout_single_node_graphs_and_duplication():
    nodes = Tensor(np.array([[1.0, -1.0], [2.0, 0.5]]))
    assert readout(nodes, [0, 1]).value.tolist() == nodes.value.tolist()
    doubled = Tensor(np.concatenate([nodes.value, nodes.value]))
    assert readout(doubled, [0, 0, 0, 0]).value.tolist() == [[6.0, -1.0]]


def test_isomorphic_graphs_share_readout(graph_factory):
    encoder = random_encoder()
    graph = graph_factory()
    twin = graph.relabel(np.random.default_rng(1).permutation(graph.node_count))
    batch = make_batch([graph, twin])
    pooled = readout(encode(encoder, batch), batch.graph_ids).value
    assert np.allclose(pooled[0], pooled[1], atol=1e-12)


def test_projection_head():
    zero = ProjectionHead(*(Parameter(np.zeros(s)) for s in [(2, 2), (1, 2), (2, 2), (1, 2)]))
    x = Tensor([[1.0, 2.0], [3.0, -1.0]])
    assert not project(zero, x).value.any()

    identity = ProjectionHead(
        Parameter(np.eye(2)), Parameter(np.zeros((1, 2))), Parameter(np.eye(2)), Parameter(np.zeros((1, 2)))
    )
    positive = Tensor([[1.0, 2.0], [0.0, 3.5]])
    assert project(identity, positive).value.tolist() == positive.value.tolist()

    head = init_head(4, np.random.default_rng(2))
    head.b1.value[...] = 0.1
    head.b2.value[...] = -0.2
    h = np.random.default_rng(3).normal(size=(5, 4))
    expected = np.maximum(h @ head.w1.value.T + 0.1, 0) @ head.w2.value.T - 0.2
    assert np.allclose(project(head, Tensor(h)).value, expected, atol=1e-12)
