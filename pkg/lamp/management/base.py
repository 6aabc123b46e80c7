import json
import logging
import time
from dataclasses import fields
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError

from lamp.forms import build_train_config
from lamp.policies.datasets import resolve_dataset_dir
from lamp.services.artifacts import RunManifest, record_run, write_manifest
from lamp.services.encoder import Readout
from lamp.services.entropy_audit import Augmentation
from lamp.services.exceptions import ConfigError, ServiceError
from lamp.services.graph_core import Dataset, prepare_dataset
from lamp.services.losses import Denominator
from lamp.services.pruning import PruningStrategy
from lamp.services.trainer import TrainConfig, ViewMode

logger = logging.getLogger(__name__)


class LampCommand(BaseCommand):
    """
    Shared plumbing for the engine commands.

    Subclasses implement ``run(manifest, out_dir, **options)``. Every invocation
    ends with a manifest.json in the output directory and a Run row, whether it
    succeeded or not. Expected failures surface as CommandError:
    config problems exit with 2, everything else with 1.
    """

    command_name = ""

    def add_output_argument(self, parser):
        parser.add_argument(
            "--out",
            help="Output directory (default: LAMP_OUTPUT_DIR/<command>/<dataset>)",
        )

    def load_dataset(self, name_or_path, manifest: RunManifest) -> Dataset:
        directory = resolve_dataset_dir(name_or_path, settings.LAMP_DATA_DIR)
        manifest.inputs["dataset"] = str(directory)
        return prepare_dataset(directory, settings.LAMP_MAX_DEGREE)

    def output_dir(self, options, label) -> Path:
        if options.get("out"):
            return Path(options["out"])
        return Path(settings.LAMP_OUTPUT_DIR) / self.command_name / Path(str(label)).name

    def run(self, manifest: RunManifest, out_dir: Path, **options):
        raise NotImplementedError

    def handle(self, *args, **options):
        label = options.get("dataset") or options.get("checkpoint") or "run"
        out_dir = self.output_dir(options, label)
        manifest = RunManifest(command=self.command_name, seed=options.get("seed") or 0)
        started = time.perf_counter()
        try:
            self.run(manifest, out_dir, **options)
        except ConfigError as exc:
            self._finish(manifest, out_dir, started, error=exc)
            raise CommandError(str(exc), returncode=2) from exc
        except ServiceError as exc:
            self._finish(manifest, out_dir, started, error=exc)
            raise CommandError(str(exc), returncode=1) from exc
        except Exception as exc:
            # unexpected failures still leave a failed manifest behind
            self._finish(manifest, out_dir, started, error=exc)
            raise
        self._finish(manifest, out_dir, started)
        self.stdout.write(f"  outputs in {out_dir}")

    def _finish(self, manifest: RunManifest, out_dir: Path, started: float, error=None):
        manifest.wall_clock_seconds = time.perf_counter() - started
        if error is not None:
            manifest.status = "failed"
            manifest.error = str(error)
        write_manifest(out_dir, manifest)
        try:
            record_run(
                manifest,
                dataset_name=Path(manifest.inputs.get("dataset", "")).name,
                out_dir=out_dir,
            )
        except DatabaseError as exc:
            # database not migrated yet; the manifest file is still there
            logger.warning("Run not recorded in the database: %s", exc)


# -----------------------------
# TRAIN CONFIG FLAGS
# -----------------------------

CONFIG_CHOICES = {
    "readout": Readout.values,
    "strategy": PruningStrategy.values,
    "denominator": Denominator.values,
    "view_mode": ViewMode.values,
    "augmentation": Augmentation.values,
}


def add_config_arguments(parser):
    """One --flag per TrainConfig field, plus --config for a JSON file."""
    parser.add_argument("--config", help="JSON file whose keys are TrainConfig fields")
    for field in fields(TrainConfig):
        flag = "--" + field.name.replace("_", "-")
        if field.type in (bool, "bool"):
            parser.add_argument(flag, dest=field.name, action="store_true", default=None)
        else:
            parser.add_argument(
                flag,
                dest=field.name,
                type=type(field.default) if field.name not in CONFIG_CHOICES else str,
                choices=CONFIG_CHOICES.get(field.name),
                default=None,
            )


def collect_config(options) -> tuple[TrainConfig, dict]:
    """Defaults, then the JSON file, then explicit flags. Returns the config and the raw overrides."""
    data = {}
    if options.get("config"):
        try:
            data = json.loads(Path(options["config"]).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {options['config']}") from exc
        except ValueError as exc:
            raise ConfigError(f"{options['config']}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{options['config']}: expected a JSON object")
    for name in TrainConfig.field_names():
        if options.get(name) is not None:
            data[name] = options[name]
    base = TrainConfig(check_finite=settings.LAMP_CHECK_FINITE)
    return build_train_config(data, base=base), data
