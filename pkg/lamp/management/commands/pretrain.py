from lamp.management.base import LampCommand, add_config_arguments, collect_config
from lamp.services.artifacts import atomic_write_json, atomic_write_text
from lamp.services.checkpoints import save_checkpoint
from lamp.services.trainer import pretrain


class Command(LampCommand):
    help = "Pre-train the GIN encoder against its pruned twin and write a checkpoint plus history."

    command_name = "pretrain"

    def add_arguments(self, parser):
        parser.add_argument("dataset", help="Dataset directory, or a name under LAMP_DATA_DIR")
        add_config_arguments(parser)
        self.add_output_argument(parser)

    def run(self, manifest, out_dir, **options):
        config, overrides = collect_config(options)
        manifest.config = config.to_dict()
        manifest.seed = config.seed
        if options.get("config"):
            manifest.inputs["config"] = options["config"]
        dataset = self.load_dataset(options["dataset"], manifest)

        def report_epoch(record):
            self.stdout.write(
                f"  epoch {record.epoch:>3}: loss {record.total:.4f} "
                f"(graph {record.graph_loss:.4f}, local {record.local_loss:.4f}) "
                f"sparsity {record.sparsity:.3f}"
            )

        result = pretrain(dataset, config, on_epoch=report_epoch)

        outputs = {
            "checkpoint": save_checkpoint(result.encoder, result.head, config, out_dir / "checkpoint.json"),
            "history": atomic_write_text(out_dir / "history.csv", result.history.to_csv()),
            "batches": atomic_write_text(out_dir / "batches.csv", result.history.batches_csv()),
            "config": atomic_write_json(out_dir / "config.json", config.to_dict()),
        }
        if result.last_mask is not None:
            outputs["mask"] = atomic_write_json(out_dir / "mask.json", result.last_mask.to_json())
        manifest.outputs = {label: str(path) for label, path in outputs.items()}
        manifest.extra = {"overrides": overrides, "epoch_seconds": result.history.seconds()}

        first, last = result.history.epochs[0], result.history.epochs[-1]
        self.stdout.write(
            self.style.SUCCESS(
                f"✅ {dataset.name}: {config.epochs} epochs, loss {first.total:.4f} -> {last.total:.4f}"
            )
        )
