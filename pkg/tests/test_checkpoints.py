import json

import numpy as np
import pytest

from lamp.services.checkpoints import checkpoint_id, load_checkpoint, save_checkpoint
from lamp.services.evaluation import embed_dataset
from lamp.services.exceptions import CheckpointError
from lamp.services.trainer import TrainConfig, pretrain


@pytest.fixture
def trained(synthetic_dataset):
    config = TrainConfig(hidden_dim=8, num_layers=2, batch_size=16, epochs=2, eval_every=0, n_s=50)
    return pretrain(synthetic_dataset, config)


@pytest.fixture
def checkpoint(trained, tmp_path):
    return save_checkpoint(trained.encoder, trained.head, trained.config, tmp_path / "checkpoint.json")


def rewrite(path, change):
    payload = json.loads(path.read_text())
    change(payload)
    path.write_text(json.dumps(payload))


def test_reload_reproduces_every_parameter(trained, checkpoint):
    encoder, head, config = load_checkpoint(checkpoint)
    assert config == trained.config
    for (name, saved), (_, loaded) in zip(
        trained.encoder.named_parameters() + trained.head.named_parameters(),
        encoder.named_parameters() + head.named_parameters(),
    ):
        assert np.array_equal(saved.value, loaded.value), name


def test_reloaded_encoder_embeds_identically(trained, checkpoint, synthetic_dataset):
    encoder, _, _ = load_checkpoint(checkpoint)
    before = embed_dataset(trained.encoder, synthetic_dataset).embeddings
    assert np.array_equal(before, embed_dataset(encoder, synthetic_dataset).embeddings)


def test_header_describes_the_architecture(checkpoint):
    payload = json.loads(checkpoint.read_text())
    assert payload["format"] == "lamp-checkpoint" and payload["version"] == 1
    assert payload["architecture"] == {"input_dim": 5, "hidden_dim": 8, "num_layers": 2, "readout": "sum"}
    assert payload["config"]["gamma"] == 0.3


def test_checkpoint_id_is_a_hash_prefix(checkpoint):
    assert len(checkpoint_id(checkpoint)) == 12


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError, match="not found"):
        load_checkpoint(tmp_path / "absent.json")


def test_not_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{ not json")
    with pytest.raises(CheckpointError, match="unreadable"):
        load_checkpoint(path)


@pytest.mark.parametrize(
    "change, message",
    [
        (lambda p: p.update(format="other"), "not a lamp checkpoint"),
        (lambda p: p.update(version=2), "version 2"),
        (lambda p: p["architecture"].pop("hidden_dim"), "incomplete architecture"),
        (lambda p: p["config"].update(hidden_dim=16), "does not match"),
        (lambda p: p["config"].update(colour="red"), "bad config"),
        (lambda p: p["parameters"].pop(), "missing parameters head.b2"),
        (lambda p: p["parameters"][0].update(shape=[3, 3]), "has shape"),
        (lambda p: p["parameters"].append({"name": "extra", "shape": [1], "values": [0.0]}), "unexpected"),
    ],
)
def test_corrupted_checkpoints_are_rejected(checkpoint, change, message):
    rewrite(checkpoint, change)
    with pytest.raises(CheckpointError, match=message):
        load_checkpoint(checkpoint)
