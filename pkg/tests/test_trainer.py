import numpy as np
import pytest

from lamp.services import trainer
from lamp.services.encoder import encode, init_encoder, init_head
from lamp.services.evaluation import embed_dataset, kfold_eval
from lamp.services.exceptions import ArgumentError, ConfigError, NonFiniteError
from lamp.services.graph_core import Dataset, Graph, make_batch, prepare_dataset
from lamp.services.pruning import PruningStrategy, derive_mask
from lamp.services.trainer import TrainConfig, ViewMode, batch_indices, pretrain, train_step
from lamp.services.seeding import child_rng

FAST = dict(hidden_dim=8, num_layers=2, batch_size=16, epochs=3, eval_every=0, n_s=50)


def test_config_from_dict_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="valid keys: .*alpha"):
        TrainConfig.from_dict({"gama": 0.3})
    assert TrainConfig.from_dict({"gamma": 0.5}).gamma == 0.5
    assert TrainConfig().replace(alpha=0.1).alpha == 0.1


def test_batches_are_a_pure_function_of_seed_and_epoch():
    first = batch_indices(41, 8, seed=3, epoch=2)
    again = batch_indices(41, 8, seed=3, epoch=2)
    assert all(np.array_equal(a, b) for a, b in zip(first, again))
    assert not np.array_equal(np.concatenate(first), np.concatenate(batch_indices(41, 8, seed=3, epoch=3)))
    # 41 = 5 * 8 + 1: the single leftover graph is dropped
    assert [b.size for b in first] == [8, 8, 8, 8, 8]
    assert sum(b.size for b in batch_indices(42, 8, 0, 1)) == 42


def test_pretrain_rejects_tiny_inputs(synthetic_dataset):
    empty = Dataset(graphs=(), num_classes=0, feature_dim=5, name="EMPTY")
    with pytest.raises(ArgumentError):
        pretrain(empty, TrainConfig(**FAST))
    with pytest.raises(ArgumentError):
        pretrain(synthetic_dataset, TrainConfig(**FAST, view_mode=ViewMode.AUGMENTATION))


def test_gamma_zero_branches_coincide(synthetic_dataset):
    encoder = init_encoder(5, 8, 3, np.random.default_rng(0))
    batch = make_batch(synthetic_dataset.graphs[:6])
    mask = derive_mask(encoder, 0.0, PruningStrategy.MAGNITUDE)
    assert np.array_equal(encode(encoder, batch).value, encode(encoder, batch, mask).value)


def test_train_step_combines_graph_and_local_terms(synthetic_dataset):
    config = TrainConfig(**FAST, gamma=0.0, alpha=1.0, learning_rate=0.0)
    rng = np.random.default_rng(1)
    encoder = init_encoder(5, 8, 2, rng)
    head = init_head(8, rng)
    mask = derive_mask(encoder, 0.0, PruningStrategy.MAGNITUDE)
    before = [p.value.copy() for p in encoder.parameters()]
    breakdown = train_step(encoder, head, synthetic_dataset.graphs[:4], config, mask, child_rng(0))
    # learning rate 0 leaves the weights in place
    assert all(np.array_equal(b, p.value) for b, p in zip(before, encoder.parameters()))
    assert abs(breakdown.total - (breakdown.graph_loss + breakdown.local_loss)) < 1e-9


def test_pretrain_history_shape(synthetic_dataset):
    seen = []
    result = pretrain(synthetic_dataset, TrainConfig(**FAST), on_epoch=seen.append)
    history = result.history
    assert [r.epoch for r in history.epochs] == [1, 2, 3]
    assert seen == history.epochs
    # 40 graphs in batches of 16: 16, 16, 8
    assert [r.batch for r in history.batches if r.epoch == 1] == [1, 2, 3]
    assert all(abs(r.sparsity - 0.3) < 0.05 for r in history.epochs)
    lines = history.to_csv().splitlines()
    assert lines[0] == "epoch,total,graph_loss,local_loss,sparsity,eval_mean,eval_std"
    assert len(lines) == 4
    assert history.batches_csv().splitlines()[0] == "epoch,batch,total,graph_loss,local_loss"
    assert result.last_mask.epoch_derived == 3


def test_pretrain_is_deterministic(synthetic_dataset):
    config = TrainConfig(**FAST, strategy=PruningStrategy.SOFT_FILTER, gamma=0.5)
    first = pretrain(synthetic_dataset, config)
    second = pretrain(synthetic_dataset, config)
    assert first.history.to_csv() == second.history.to_csv()
    assert first.history.batches_csv() == second.history.batches_csv()
    for a, b in zip(first.encoder.parameters(), second.encoder.parameters()):
        assert np.array_equal(a.value, b.value)


def test_parameter_count_is_constant(synthetic_dataset):
    config = TrainConfig(**FAST, gamma=0.9)
    result = pretrain(synthetic_dataset, config)
    fresh = init_encoder(5, 8, 2, np.random.default_rng(0))
    assert [p.shape for p in result.encoder.parameters()] == [p.shape for p in fresh.parameters()]


def test_soft_filter_sparsity_is_row_level(synthetic_dataset):
    result = pretrain(synthetic_dataset, TrainConfig(**FAST, strategy=PruningStrategy.SOFT_FILTER, gamma=0.5))
    for matrix in result.last_mask.matrices.values():
        assert all(row.min() == row.max() for row in matrix)
    assert result.history.epochs[-1].sparsity == 0.5


def test_augmentation_view_mode_runs(synthetic_dataset):
    config = TrainConfig(**FAST, view_mode=ViewMode.AUGMENTATION, alpha=0.0, augmentation="node_drop")
    result = pretrain(synthetic_dataset, config)
    assert result.last_mask is None
    assert all(r.sparsity == 0.0 and r.local_loss == 0.0 for r in result.history.epochs)


def test_periodic_evaluation_is_recorded(synthetic_dataset):
    config = TrainConfig(**{**FAST, "eval_every": 2, "epochs": 2}, eval_repeats=1)
    history = pretrain(synthetic_dataset, config).history
    assert history.epochs[0].eval_mean is None
    assert 0.0 <= history.epochs[1].eval_mean <= 100.0


def test_non_finite_loss_reports_epoch_and_batch():
    graphs = tuple(
        Graph.build(3, [(0, 1), (1, 2)], features=np.full((3, 1), np.nan), label=i % 2) for i in range(4)
    )
    dataset = Dataset(graphs=graphs, num_classes=2, feature_dim=1, name="NAN")
    with pytest.raises(NonFiniteError, match="epoch 1, batch 1"):
        pretrain(dataset, TrainConfig(**FAST))


def test_training_lowers_the_loss_and_separates_classes(synthetic_dataset):
    config = TrainConfig(hidden_dim=16, num_layers=2, batch_size=32, epochs=15, eval_every=0, learning_rate=0.01)
    result = pretrain(synthetic_dataset, config)
    assert result.history.epochs[-1].total < result.history.epochs[0].total
    scores = kfold_eval(embed_dataset(result.encoder, synthetic_dataset), k=5, repeats=2)
    assert scores.mean >= 80.0


@pytest.mark.dataset
@pytest.mark.slow
def test_mutag_desk_scale_training(real_dataset_dir):
    dataset = prepare_dataset(real_dataset_dir("MUTAG"), 128)
    result = pretrain(dataset, TrainConfig(eval_every=0))
    assert result.history.epochs[-1].total < result.history.epochs[0].total
    scores = kfold_eval(embed_dataset(result.encoder, dataset))
    assert scores.mean >= 75.0


@pytest.mark.dataset
@pytest.mark.slow
def test_local_loss_does_not_hurt_on_mutag(real_dataset_dir):
    dataset = prepare_dataset(real_dataset_dir("MUTAG"), 128)
    with_local, without_local = [], []
    for seed in range(3):
        for alpha, sink in ((1.0, with_local), (0.0, without_local)):
            result = pretrain(dataset, TrainConfig(eval_every=0, alpha=alpha, seed=seed))
            sink.append(kfold_eval(embed_dataset(result.encoder, dataset), seed=seed).mean)
    assert np.mean(with_local) >= np.mean(without_local) - 1.0


def test_mask_is_held_until_the_next_epoch(synthetic_dataset, monkeypatch):
    # 40 graphs in batches of 16: three steps per epoch
    real_step = trainer.train_step
    masks, grown = [], []

    def step(encoder, head, graphs, config, mask, rng):
        masks.append(mask)
        result = real_step(encoder, head, graphs, config, mask, rng)
        if len(masks) == 1:
            pruned = np.argwhere(mask["encoder.layers.0.w1"] == 0)[0]
            grown.append(tuple(pruned))
            encoder.layers[0].w1.value[tuple(pruned)] = 1e3
        return result

    monkeypatch.setattr(trainer, "train_step", step)
    pretrain(synthetic_dataset, TrainConfig(**FAST))
    entry = grown[0]
    first_epoch, second_epoch = masks[:3], masks[3:6]
    assert all(m is first_epoch[0] for m in first_epoch)
    assert all(m["encoder.layers.0.w1"][entry] == 0 for m in first_epoch)
    assert all(m.epoch_derived == 2 for m in second_epoch)
    assert second_epoch[0]["encoder.layers.0.w1"][entry] == 1
