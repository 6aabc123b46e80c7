"""JSON checkpoints for the encoder, projection head and training config.

Floats are written with Python's shortest round-tripping repr, so a reload
reproduces every parameter bit for bit.
"""

import json
import logging
from pathlib import Path

import numpy as np

from lamp.services.artifacts import atomic_write_text, sha256_file
from lamp.services.encoder import Encoder, ProjectionHead, init_encoder, init_head
from lamp.services.exceptions import CheckpointError, ConfigError
from lamp.services.trainer import TrainConfig

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "lamp-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(encoder: Encoder, head: ProjectionHead, config: TrainConfig, path) -> Path:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "architecture": {
            "input_dim": encoder.input_dim,
            "hidden_dim": encoder.hidden_dim,
            "num_layers": encoder.num_layers,
            "readout": str(config.readout),
        },
        "config": config.to_dict(),
        "parameters": [
            {"name": name, "shape": list(p.shape), "values": p.value.ravel().tolist()}
            for name, p in encoder.named_parameters() + head.named_parameters()
        ],
    }
    path = atomic_write_text(path, json.dumps(payload, indent=1) + "\n")
    logger.info("Checkpoint written to %s", path)
    return path


def _header(payload, path) -> dict:
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a lamp checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint version {payload.get('version')!r}, expected {CHECKPOINT_VERSION}"
        )
    architecture = payload.get("architecture")
    try:
        return {key: int(architecture[key]) for key in ("input_dim", "hidden_dim", "num_layers")}
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: incomplete architecture header") from exc


def load_checkpoint(path) -> tuple[Encoder, ProjectionHead, TrainConfig]:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise CheckpointError(f"{path}: checkpoint not found") from exc
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"{path}: unreadable checkpoint ({exc})") from exc

    arch = _header(payload, path)
    try:
        config = TrainConfig.from_dict(payload.get("config") or {})
    except (ConfigError, TypeError) as exc:
        raise CheckpointError(f"{path}: bad config block ({exc})") from exc
    if config.hidden_dim != arch["hidden_dim"] or config.num_layers != arch["num_layers"]:
        raise CheckpointError(f"{path}: config does not match the architecture header")

    # fresh modules, filled only after every tensor has been validated
    rng = np.random.default_rng(0)
    encoder = init_encoder(arch["input_dim"], arch["hidden_dim"], arch["num_layers"], rng)
    head = init_head(arch["hidden_dim"], rng)
    expected = dict(encoder.named_parameters() + head.named_parameters())

    stored = {}
    for entry in payload.get("parameters") or []:
        try:
            name, shape = entry["name"], tuple(entry["shape"])
            values = np.array(entry["values"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"{path}: malformed parameter entry") from exc
        if name not in expected:
            raise CheckpointError(f"{path}: unexpected parameter {name!r}")
        if shape != expected[name].shape or values.size != expected[name].value.size:
            raise CheckpointError(
                f"{path}: parameter {name} has shape {shape}, architecture needs {expected[name].shape}"
            )
        stored[name] = values.reshape(shape)
    missing = sorted(set(expected) - set(stored))
    if missing:
        raise CheckpointError(f"{path}: missing parameters {', '.join(missing)}")

    for name, values in stored.items():
        expected[name].value[...] = values
    return encoder, head, config


def checkpoint_id(path) -> str:
    return sha256_file(path)[:12]
