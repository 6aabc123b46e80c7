"""Graph-level NT-Xent, node-level local contrast and their weighted sum.

The NT-Xent denominator excludes the positive pair unless the ``simclr``
form is requested, so the default loss can go negative.
"""

import logging
from dataclasses import dataclass

import numpy as np
from django.db import models

from lamp.services.autodiff import (
    Tensor,
    add,
    concat_rows,
    cosine_sim_matrix,
    diagonal,
    gather,
    masked_logsumexp,
    mean_all,
    scale,
    select_rows,
    subtract,
    transpose,
)
from lamp.services.exceptions import ArgumentError, ContractError, ShapeError

logger = logging.getLogger(__name__)


class Denominator(models.TextChoices):
    AS_PRINTED = "as_printed", "Negatives only"
    SIMCLR = "simclr", "Positive included"


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    graph_loss: float
    local_loss: float
    alpha: float
    temperature: float

    def row(self) -> list[float]:
        return [self.total, self.graph_loss, self.local_loss]


def _check_tau(tau: float):
    if tau <= 0:
        raise ArgumentError(f"temperature tau must be positive, got {tau}")


def _anchor_terms(logits: Tensor, positives: Tensor, mask: np.ndarray) -> Tensor:
    # -log(e^pos / sum_mask e^logit) per anchor row
    return subtract(masked_logsumexp(logits, mask), positives)


def nt_xent(z1: Tensor, z2: Tensor, tau: float, denominator: str = Denominator.AS_PRINTED) -> Tensor:
    if z1.shape != z2.shape:
        raise ShapeError("nt_xent", z1.shape, z2.shape)
    count = z1.rows
    if count < 2:
        raise ArgumentError(f"nt_xent needs at least 2 graphs per batch, got {count}")
    _check_tau(tau)
    if denominator == Denominator.AS_PRINTED:
        mask = ~np.eye(count, dtype=bool)
    elif denominator == Denominator.SIMCLR:
        mask = np.ones((count, count), dtype=bool)
    else:
        raise ArgumentError(
            f"unknown denominator {denominator!r}; choose from {', '.join(Denominator.values)}"
        )

    logits = scale(cosine_sim_matrix(z1, z2), 1.0 / tau)
    mirrored = transpose(logits)
    view1 = _anchor_terms(logits, diagonal(logits), mask)
    view2 = _anchor_terms(mirrored, diagonal(mirrored), mask)
    return mean_all(concat_rows([view1, view2]))


def sample_anchors(node_count: int, n_s: int, rng: np.random.Generator) -> np.ndarray:
    """All nodes when they fit, otherwise n_s of them drawn without replacement (sorted)."""
    if n_s < 1:
        raise ArgumentError(f"n_s must be >= 1, got {n_s}")
    if node_count <= n_s:
        return np.arange(node_count)
    return np.sort(rng.choice(node_count, size=n_s, replace=False))


def local_contrastive(
    h1: Tensor,
    h2: Tensor,
    graph_ids,
    tau: float,
    n_s: int,
    rng: np.random.Generator,
) -> Tensor:
    """Node-level contrast: the positive is the same node in the other view,
    negatives are every node of the other graphs in the batch."""
    if h1.shape != h2.shape:
        raise ShapeError("local_contrastive", h1.shape, h2.shape)
    graph_ids = np.asarray(graph_ids, dtype=np.int64)
    if np.unique(graph_ids).size < 2:
        raise ContractError("local contrast needs at least 2 graphs in the batch")
    _check_tau(tau)

    anchors = sample_anchors(h1.rows, n_s, rng)
    rows = np.arange(anchors.size)
    other_graph = graph_ids[anchors][:, None] != graph_ids[None, :]

    terms = []
    for anchor_view, other_view in ((h1, h2), (h2, h1)):
        logits = scale(cosine_sim_matrix(select_rows(anchor_view, anchors), other_view), 1.0 / tau)
        terms.append(_anchor_terms(logits, gather(logits, rows, anchors), other_graph))
    return mean_all(concat_rows(terms))


def total_loss(graph_loss: Tensor, local_loss: Tensor | None, alpha: float) -> Tensor:
    """graph_loss + alpha * local_loss, still connected to the tape."""
    if alpha < 0:
        raise ArgumentError(f"alpha must be >= 0, got {alpha}")
    if local_loss is None:
        return graph_loss
    return add(graph_loss, scale(local_loss, alpha))


def breakdown(total: Tensor, graph_loss: Tensor, local_loss: Tensor | None, alpha: float, tau: float) -> LossBreakdown:
    return LossBreakdown(
        total=total.item(),
        graph_loss=graph_loss.item(),
        local_loss=0.0 if local_loss is None else local_loss.item(),
        alpha=alpha,
        temperature=tau,
    )
