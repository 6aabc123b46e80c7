"""Output files and run manifests.

Every file goes through a temp file in the target directory followed by
``os.replace``, so a crashed run never leaves a half-written artifact.
"""

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

from django.core.serializers.json import DjangoJSONEncoder
from django.utils import timezone

from lamp.services.exceptions import FormatError, LoadError

if TYPE_CHECKING:
    from lamp.models import Run

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    return path


def dumps(data) -> str:
    return json.dumps(data, cls=DjangoJSONEncoder, indent=2, sort_keys=True) + "\n"


def atomic_write_json(path, data) -> Path:
    return atomic_write_text(path, dumps(data))


def read_json(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise LoadError(f"{path}: file not found") from exc
    except ValueError as exc:
        raise FormatError(f"invalid JSON ({exc})", path=path) from exc


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict = field(default_factory=dict)
    seed: int = 0
    inputs: dict[str, str] = field(default_factory=dict)
    # label -> path
    outputs: dict[str, str] = field(default_factory=dict)
    hashes: dict[str, str] = field(default_factory=dict)
    wall_clock_seconds: float = 0.0
    status: str = "succeeded"
    error: str = ""
    extra: dict = field(default_factory=dict)
    started_at: str = ""

    def to_dict(self) -> dict:
        return asdict(self)

    def verify(self) -> list[str]:
        """Labels of outputs whose file no longer matches the recorded hash."""
        return [
            label
            for label, path in self.outputs.items()
            if not Path(path).exists() or sha256_file(path) != self.hashes.get(label)
        ]


def write_manifest(out_dir, manifest: RunManifest) -> Path:
    """Hash every recorded output, then write the manifest next to them."""
    manifest.hashes = {label: sha256_file(path) for label, path in manifest.outputs.items()}
    if not manifest.started_at:
        manifest.started_at = timezone.now().isoformat()
    path = atomic_write_json(Path(out_dir) / MANIFEST_NAME, manifest.to_dict())
    logger.debug("Manifest for %s written to %s", manifest.command, path)
    return path


def load_manifest(path) -> RunManifest:
    return RunManifest(**read_json(path))


def record_run(manifest: RunManifest, *, dataset_name: str = "", out_dir="") -> "Run":
    from lamp.models import Run

    return Run.objects.create(
        command=manifest.command,
        status=manifest.status,
        dataset_name=dataset_name,
        seed=manifest.seed,
        config=manifest.config,
        manifest=manifest.to_dict(),
        out_dir=str(out_dir),
        wall_clock_seconds=manifest.wall_clock_seconds,
        error=manifest.error,
    )
