"""Pruning masks for the sparse twin encoder.

A mask never touches the underlying weights: the pruned branch multiplies
the live weights by a constant 0/1 matrix, so masked entries keep training
through the dense branch and can come back at the next epoch boundary.
Ranking is per weight matrix; biases are never pruned.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from django.db import models

from lamp.services.autodiff import Tensor, constant, multiply
from lamp.services.exceptions import ArgumentError, ShapeError
from lamp.services.rounding import floor_count

logger = logging.getLogger(__name__)


class PruningStrategy(models.TextChoices):
    MAGNITUDE = "magnitude", "Magnitude"
    SOFT_FILTER = "soft_filter", "Soft filter"


@dataclass(frozen=True)
class PruneMask:
    # weight name -> 0/1 matrix with that weight's shape
    matrices: dict[str, np.ndarray]
    gamma: float
    strategy: str
    epoch_derived: int = 0
    names: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        for matrix in self.matrices.values():
            matrix.setflags(write=False)
        object.__setattr__(self, "names", tuple(self.matrices))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.matrices[name]

    def __contains__(self, name: str) -> bool:
        return name in self.matrices

    def to_json(self) -> dict:
        return {
            "gamma": self.gamma,
            "strategy": str(self.strategy),
            "epoch_derived": self.epoch_derived,
            "sparsity": sparsity(self),
            "shapes": {name: list(m.shape) for name, m in self.matrices.items()},
            "matrices": {
                name: m.astype(np.int64).ravel().tolist() for name, m in self.matrices.items()
            },
        }


def _check_gamma(gamma: float):
    if not 0.0 <= gamma < 1.0:
        raise ArgumentError(f"pruning ratio gamma must lie in [0, 1), got {gamma}")


def _as_arrays(weights) -> dict[str, np.ndarray]:
    return {
        name: (w.value if isinstance(w, Tensor) else np.asarray(w, dtype=np.float64))
        for name, w in weights.items()
    }


def magnitude_mask(weights, gamma: float, epoch: int = 0) -> PruneMask:
    """Zero the floor(gamma * count) smallest-|w| entries of each matrix (ties: lower flat index first)."""
    _check_gamma(gamma)
    matrices = {}
    for name, value in _as_arrays(weights).items():
        mask = np.ones(value.size)
        order = np.argsort(np.abs(value).ravel(), kind="stable")
        mask[order[: floor_count(gamma, value.size)]] = 0.0
        matrices[name] = mask.reshape(value.shape)
    return PruneMask(matrices, gamma, PruningStrategy.MAGNITUDE, epoch)


def soft_filter_mask(weights, gamma: float, epoch: int = 0) -> PruneMask:
    """Zero the floor(gamma * rows) output rows with the smallest L2 norm (ties: lower row first)."""
    _check_gamma(gamma)
    matrices = {}
    for name, value in _as_arrays(weights).items():
        norms = np.sqrt((value * value).sum(axis=1))
        order = np.argsort(norms, kind="stable")
        mask = np.ones(value.shape)
        mask[order[: floor_count(gamma, value.shape[0])]] = 0.0
        matrices[name] = mask
    return PruneMask(matrices, gamma, PruningStrategy.SOFT_FILTER, epoch)


def derive_mask(encoder, gamma: float, strategy: str, epoch: int = 0) -> PruneMask:
    """Mask for the current encoder weights; called once at the start of every epoch."""
    weights = encoder.prunable_weights()
    if strategy == PruningStrategy.MAGNITUDE:
        mask = magnitude_mask(weights, gamma, epoch)
    elif strategy == PruningStrategy.SOFT_FILTER:
        mask = soft_filter_mask(weights, gamma, epoch)
    else:
        raise ArgumentError(
            f"unknown pruning strategy {strategy!r}; choose from {', '.join(PruningStrategy.values)}"
        )
    logger.debug(
        "Epoch %d %s mask at gamma %.2f: sparsity %.4f", epoch, strategy, gamma, sparsity(mask)
    )
    return mask


def apply_mask(weight: Tensor, mask_matrix) -> Tensor:
    mask_matrix = np.asarray(mask_matrix, dtype=np.float64)
    if mask_matrix.shape != weight.shape:
        raise ShapeError("apply_mask", weight.shape, mask_matrix.shape)
    return multiply(weight, constant(mask_matrix))


def sparsity(mask: PruneMask) -> float:
    total = sum(m.size for m in mask.matrices.values())
    if total == 0:
        return 0.0
    zeros = sum(int((m == 0).sum()) for m in mask.matrices.values())
    return zeros / total
