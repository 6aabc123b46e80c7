from lamp.management.base import LampCommand
from lamp.services.artifacts import atomic_write_text
from lamp.services.checkpoints import checkpoint_id, load_checkpoint
from lamp.services.evaluation import embed_dataset
from lamp.services.exceptions import CheckpointError


def embed_from_checkpoint(command: LampCommand, checkpoint, dataset_name, manifest):
    """Load a checkpoint and a dataset, check they fit together, embed every graph."""
    encoder, _, config = load_checkpoint(checkpoint)
    manifest.inputs["checkpoint"] = str(checkpoint)
    manifest.config = config.to_dict()
    manifest.seed = config.seed
    dataset = command.load_dataset(dataset_name, manifest)
    if dataset.feature_dim != encoder.input_dim:
        raise CheckpointError(
            f"{checkpoint} expects {encoder.input_dim} input features, "
            f"{dataset.name} provides {dataset.feature_dim}"
        )
    return embed_dataset(encoder, dataset, config.readout, checkpoint_id(checkpoint))


class Command(LampCommand):
    help = "Export dense-encoder graph embeddings of a dataset as CSV."

    command_name = "embed"

    def add_arguments(self, parser):
        parser.add_argument("checkpoint")
        parser.add_argument("dataset", help="Dataset directory, or a name under LAMP_DATA_DIR")
        self.add_output_argument(parser)

    def run(self, manifest, out_dir, **options):
        embeds = embed_from_checkpoint(self, options["checkpoint"], options["dataset"], manifest)
        path = atomic_write_text(out_dir / "embeddings.csv", embeds.to_csv())
        manifest.outputs = {"embeddings": str(path)}
        self.stdout.write(
            self.style.SUCCESS(f"✅ {len(embeds)} x {embeds.dim} embeddings of {embeds.dataset_name}")
        )
