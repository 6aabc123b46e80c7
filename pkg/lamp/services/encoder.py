"""GIN encoder shared by the dense branch and its mask-pruned twin, plus the projection head.

Weights are stored (out, in) and applied as ``x @ W.T``, so an output neuron
is a row of W.
"""

from dataclasses import dataclass

import numpy as np
from django.db import models

from lamp.services.autodiff import (
    Parameter,
    Tensor,
    add,
    add_bias,
    constant,
    matmul,
    relu,
    scale,
    scatter_sum,
    segment_mean,
    segment_sum,
    transpose,
)
from lamp.services.exceptions import ArgumentError, ShapeError
from lamp.services.graph_core import GraphBatch
from lamp.services.pruning import PruneMask, apply_mask


class Readout(models.TextChoices):
    SUM = "sum", "Sum"
    MEAN = "mean", "Mean"


@dataclass
class GinLayer:
    w1: Parameter
    b1: Parameter
    w2: Parameter
    b2: Parameter
    eps: float = 0.0

    @property
    def input_dim(self) -> int:
        return self.w1.cols

    @property
    def output_dim(self) -> int:
        return self.w2.rows


@dataclass
class Encoder:
    layers: list[GinLayer]
    input_dim: int
    hidden_dim: int

    def __post_init__(self):
        if len(self.layers) < 2:
            raise ArgumentError(f"the encoder needs at least 2 layers, got {len(self.layers)}")
        expected = self.input_dim
        for index, layer in enumerate(self.layers):
            if layer.input_dim != expected or layer.w2.rows != self.hidden_dim:
                raise ShapeError(f"encoder.layers.{index}", layer.w1.shape, layer.w2.shape)
            expected = layer.output_dim

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def named_parameters(self) -> list[tuple[str, Parameter]]:
        named = []
        for index, layer in enumerate(self.layers):
            prefix = f"encoder.layers.{index}"
            named += [
                (f"{prefix}.w1", layer.w1),
                (f"{prefix}.b1", layer.b1),
                (f"{prefix}.w2", layer.w2),
                (f"{prefix}.b2", layer.b2),
            ]
        return named

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def prunable_weights(self) -> dict[str, Parameter]:
        """Weight matrices the pruned twin masks; biases are left out."""
        return {name: p for name, p in self.named_parameters() if name.endswith((".w1", ".w2"))}


@dataclass
class ProjectionHead:
    w1: Parameter
    b1: Parameter
    w2: Parameter
    b2: Parameter

    def named_parameters(self) -> list[tuple[str, Parameter]]:
        return [("head.w1", self.w1), ("head.b1", self.b1), ("head.w2", self.w2), ("head.b2", self.b2)]

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]


# =========================================================================
# CONSTRUCTION
# =========================================================================


def glorot_uniform(fan_out: int, fan_in: int, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def _linear_params(name: str, fan_out: int, fan_in: int, rng) -> tuple[Parameter, Parameter]:
    return (
        Parameter(glorot_uniform(fan_out, fan_in, rng), name=f"{name}.w"),
        Parameter(np.zeros((1, fan_out)), name=f"{name}.b"),
    )


def init_encoder(input_dim: int, hidden_dim: int, num_layers: int, rng: np.random.Generator) -> Encoder:
    layers = []
    for index in range(num_layers):
        fan_in = input_dim if index == 0 else hidden_dim
        w1, b1 = _linear_params(f"encoder.layers.{index}.1", hidden_dim, fan_in, rng)
        w2, b2 = _linear_params(f"encoder.layers.{index}.2", hidden_dim, hidden_dim, rng)
        layers.append(GinLayer(w1, b1, w2, b2))
    encoder = Encoder(layers, input_dim, hidden_dim)
    for name, param in encoder.named_parameters():
        param.name = name
    return encoder


def init_head(hidden_dim: int, rng: np.random.Generator) -> ProjectionHead:
    w1, b1 = _linear_params("head.1", hidden_dim, hidden_dim, rng)
    w2, b2 = _linear_params("head.2", hidden_dim, hidden_dim, rng)
    head = ProjectionHead(w1, b1, w2, b2)
    for name, param in head.named_parameters():
        param.name = name
    return head


# =========================================================================
# FORWARD
# =========================================================================


def _linear(x: Tensor, weight: Parameter, bias: Parameter, mask_matrix=None) -> Tensor:
    effective = weight if mask_matrix is None else apply_mask(weight, mask_matrix)
    return add_bias(matmul(x, transpose(effective)), bias)


def encode(encoder: Encoder, batch: GraphBatch, mask: PruneMask | None = None) -> Tensor:
    """Node embeddings of the last layer, dense when ``mask`` is None and pruned otherwise."""
    if batch.features.shape[1] != encoder.input_dim:
        raise ShapeError(
            "encode", batch.features.shape, (encoder.input_dim, encoder.hidden_dim)
        )

    def masked(name):
        return None if mask is None else mask[name]

    h = constant(batch.features)
    for index, layer in enumerate(encoder.layers):
        prefix = f"encoder.layers.{index}"
        center = h if layer.eps == 0 else scale(h, 1.0 + layer.eps)
        aggregated = add(center, scatter_sum(h, batch.edges))
        hidden = relu(_linear(aggregated, layer.w1, layer.b1, masked(f"{prefix}.w1")))
        h = relu(_linear(hidden, layer.w2, layer.b2, masked(f"{prefix}.w2")))
    return h


def readout(node_embeds: Tensor, graph_ids, mode: str = Readout.SUM, num_graphs: int | None = None) -> Tensor:
    if mode == Readout.SUM:
        return segment_sum(node_embeds, graph_ids, num_graphs)
    if mode == Readout.MEAN:
        return segment_mean(node_embeds, graph_ids, num_graphs)
    raise ArgumentError(f"unknown readout {mode!r}; choose from {', '.join(Readout.values)}")


def project(head: ProjectionHead, graph_embeds: Tensor) -> Tensor:
    return _linear(relu(_linear(graph_embeds, head.w1, head.b1)), head.w2, head.b2)
