"""Dual-branch contrastive pre-training.

Each epoch derives a pruning mask from the current dense weights and holds it
fixed while every mini-batch is encoded twice: once by the dense encoder and
once through the mask. Both views share the projection head. The graph-level
NT-Xent loss plus alpha times the node-level local loss is minimized with Adam.

``ViewMode.AUGMENTATION`` swaps the pruned twin for two randomly augmented
copies of the batch, which is the augmentation-based baseline.
"""

import csv
import io
import logging
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from django.db import models

from lamp.services.autodiff import Tape, adam_step, backward
from lamp.services.encoder import Encoder, ProjectionHead, Readout, encode, init_encoder, init_head, project, readout
from lamp.services.entropy_audit import Augmentation, augment
from lamp.services.exceptions import ArgumentError, ConfigError, NonFiniteError, ServiceError
from lamp.services.graph_core import Dataset, make_batch
from lamp.services.losses import Denominator, LossBreakdown, breakdown, local_contrastive, nt_xent, total_loss
from lamp.services.pruning import PruneMask, PruningStrategy, derive_mask, sparsity
from lamp.services.seeding import child_rng

logger = logging.getLogger(__name__)


class ViewMode(models.TextChoices):
    PRUNING = "pruning", "Dense vs. pruned encoder"
    AUGMENTATION = "augmentation", "Two augmented views"


@dataclass(frozen=True)
class TrainConfig:
    hidden_dim: int = 32
    num_layers: int = 3
    batch_size: int = 128
    learning_rate: float = 0.01
    epochs: int = 20
    gamma: float = 0.3
    alpha: float = 1.0
    tau: float = 0.1
    strategy: str = PruningStrategy.MAGNITUDE.value
    n_s: int = 5000
    seed: int = 0
    readout: str = Readout.SUM.value
    eval_every: int = 10
    eval_repeats: int = 5
    denominator: str = Denominator.AS_PRINTED.value
    view_mode: str = ViewMode.PRUNING.value
    augmentation: str = Augmentation.SUBGRAPH.value
    aug_strength: float = 0.2
    check_finite: bool = False
    allow_off_grid: bool = False

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        unknown = set(data) - set(cls.field_names())
        if unknown:
            raise ConfigError(
                f"unknown config key(s): {', '.join(sorted(unknown))}", valid_keys=cls.field_names()
            )
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "TrainConfig":
        return TrainConfig.from_dict({**self.to_dict(), **changes})


# =========================================================================
# HISTORY
# =========================================================================


@dataclass
class BatchRecord:
    epoch: int
    batch: int
    loss: LossBreakdown


@dataclass
class EpochRecord:
    epoch: int
    total: float
    graph_loss: float
    local_loss: float
    sparsity: float
    seconds: float
    eval_mean: float | None = None
    eval_std: float | None = None


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    batches: list[BatchRecord] = field(default_factory=list)

    def to_csv(self) -> str:
        """
        Per-epoch table: epoch,total,graph_loss,local_loss,sparsity,eval_mean,eval_std.

        There is no seconds column, so identical runs give identical files.
        Per-epoch wall clock goes to the run manifest as ``extra.epoch_seconds``
        (see ``seconds()``).
        """
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["epoch", "total", "graph_loss", "local_loss", "sparsity", "eval_mean", "eval_std"])
        for r in self.epochs:
            writer.writerow(
                [
                    r.epoch,
                    repr(r.total),
                    repr(r.graph_loss),
                    repr(r.local_loss),
                    repr(r.sparsity),
                    "" if r.eval_mean is None else repr(r.eval_mean),
                    "" if r.eval_std is None else repr(r.eval_std),
                ]
            )
        return buffer.getvalue()

    def batches_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["epoch", "batch", "total", "graph_loss", "local_loss"])
        for r in self.batches:
            writer.writerow([r.epoch, r.batch, *(repr(v) for v in r.loss.row())])
        return buffer.getvalue()

    def seconds(self) -> list[float]:
        return [r.seconds for r in self.epochs]


@dataclass
class PretrainResult:
    encoder: Encoder
    head: ProjectionHead
    history: TrainHistory
    config: TrainConfig
    last_mask: PruneMask | None = None


# =========================================================================
# TRAINING
# =========================================================================


def batch_indices(graph_count: int, batch_size: int, seed: int, epoch: int) -> list[np.ndarray]:
    """Shuffled mini-batches for one epoch; a trailing single-graph batch is dropped."""
    order = child_rng(seed, epoch).permutation(graph_count)
    batches = [order[start : start + batch_size] for start in range(0, graph_count, batch_size)]
    if batches and batches[-1].size < 2:
        batches.pop()
    return batches


def _validate(dataset: Dataset, config: TrainConfig):
    if len(dataset) == 0:
        raise ArgumentError(f"{dataset.name or 'dataset'} is empty")
    if len(dataset) < 2:
        raise ArgumentError("pre-training needs at least 2 graphs for in-batch negatives")
    if config.batch_size < 2:
        raise ArgumentError(f"batch_size must be >= 2, got {config.batch_size}")
    if config.epochs < 1:
        raise ArgumentError(f"epochs must be >= 1, got {config.epochs}")
    if config.view_mode not in ViewMode.values:
        raise ArgumentError(f"unknown view mode {config.view_mode!r}")
    if config.view_mode == ViewMode.AUGMENTATION and config.alpha != 0:
        raise ArgumentError(
            "the local loss needs row-aligned views; set alpha to 0 in augmentation view mode"
        )


def train_step(
    encoder: Encoder,
    head: ProjectionHead,
    graphs,
    config: TrainConfig,
    mask: PruneMask | None,
    rng: np.random.Generator,
) -> LossBreakdown:
    """Forward both branches on one mini-batch, backpropagate and take one Adam step."""
    batch = make_batch(graphs)
    with Tape(check_finite=config.check_finite) as tape:
        if config.view_mode == ViewMode.PRUNING:
            first = second = batch
            h1 = encode(encoder, batch)
            h2 = encode(encoder, batch, mask)
        else:
            first = make_batch([augment(g, config.augmentation, config.aug_strength, rng) for g in graphs])
            second = make_batch([augment(g, config.augmentation, config.aug_strength, rng) for g in graphs])
            h1 = encode(encoder, first)
            h2 = encode(encoder, second)

        z1 = project(head, readout(h1, first.graph_ids, config.readout, first.batch_size))
        z2 = project(head, readout(h2, second.graph_ids, config.readout, second.batch_size))
        graph_loss = nt_xent(z1, z2, config.tau, config.denominator)
        local_loss = None
        if config.alpha > 0:
            local_loss = local_contrastive(h1, h2, batch.graph_ids, config.tau, config.n_s, rng)
        loss = total_loss(graph_loss, local_loss, config.alpha)
        if not np.isfinite(loss.item()):
            raise NonFiniteError("loss is not finite")
        backward(loss, tape)

    adam_step(encoder.parameters() + head.parameters(), config.learning_rate)
    return breakdown(loss, graph_loss, local_loss, config.alpha, config.tau)


def _periodic_eval(encoder: Encoder, dataset: Dataset, config: TrainConfig, epoch: int):
    from lamp.services.evaluation import embed_dataset, kfold_eval

    try:
        result = kfold_eval(
            embed_dataset(encoder, dataset, config.readout),
            repeats=config.eval_repeats,
            seed=config.seed,
        )
    except ServiceError as exc:
        logger.warning("Epoch %d evaluation skipped: %s", epoch, exc)
        return None, None
    logger.info("Epoch %d evaluation: %s", epoch, result.summary_line())
    return result.mean, result.std


def pretrain(dataset: Dataset, config: TrainConfig, on_epoch=None) -> PretrainResult:
    """Run pre-training; ``on_epoch`` is called with each finished EpochRecord."""
    _validate(dataset, config)
    init_rng = child_rng(config.seed)
    encoder = init_encoder(dataset.feature_dim, config.hidden_dim, config.num_layers, init_rng)
    head = init_head(config.hidden_dim, init_rng)
    parameter_count = sum(p.value.size for p in encoder.parameters() + head.parameters())
    logger.info(
        "Pre-training on %s: %d graphs, %d parameters, %s view, gamma %.2f, alpha %g",
        dataset.name,
        len(dataset),
        parameter_count,
        config.view_mode,
        config.gamma,
        config.alpha,
    )

    history = TrainHistory()
    mask = None
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        if config.view_mode == ViewMode.PRUNING:
            mask = derive_mask(encoder, config.gamma, config.strategy, epoch)

        losses = []
        for number, indices in enumerate(
            batch_indices(len(dataset), config.batch_size, config.seed, epoch), start=1
        ):
            graphs = [dataset.graphs[i] for i in indices]
            try:
                step = train_step(encoder, head, graphs, config, mask, child_rng(config.seed, epoch, number))
            except NonFiniteError as exc:
                raise NonFiniteError(str(exc), epoch=epoch, batch=number) from exc
            losses.append(step)
            history.batches.append(BatchRecord(epoch, number, step))

        record = EpochRecord(
            epoch=epoch,
            total=float(np.mean([s.total for s in losses])),
            graph_loss=float(np.mean([s.graph_loss for s in losses])),
            local_loss=float(np.mean([s.local_loss for s in losses])),
            sparsity=0.0 if mask is None else sparsity(mask),
            seconds=0.0,
        )
        if config.eval_every and epoch % config.eval_every == 0 and config.eval_repeats > 0:
            record.eval_mean, record.eval_std = _periodic_eval(encoder, dataset, config, epoch)
        record.seconds = time.perf_counter() - started
        history.epochs.append(record)
        logger.info(
            "Epoch %d/%d: total %.4f graph %.4f local %.4f sparsity %.3f (%.1fs)",
            epoch,
            config.epochs,
            record.total,
            record.graph_loss,
            record.local_loss,
            record.sparsity,
            record.seconds,
        )
        if on_epoch is not None:
            on_epoch(record)

    return PretrainResult(encoder, head, history, config, mask)
