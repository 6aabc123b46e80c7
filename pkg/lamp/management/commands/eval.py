from pathlib import Path

from lamp.management.base import LampCommand
from lamp.management.commands.embed import embed_from_checkpoint
from lamp.services.artifacts import atomic_write_json
from lamp.services.evaluation import EmbeddingSet, kfold_eval
from lamp.services.exceptions import ArgumentError, LoadError


class Command(LampCommand):
    help = "10-fold logistic-regression accuracy of embeddings (from a checkpoint or an embed CSV)."

    command_name = "eval"

    def add_arguments(self, parser):
        parser.add_argument("checkpoint", nargs="?")
        parser.add_argument("dataset", nargs="?", help="Dataset directory, or a name under LAMP_DATA_DIR")
        parser.add_argument("--embeddings", help="CSV written by the embed command")
        parser.add_argument("--folds", type=int, default=10)
        parser.add_argument("--repeats", type=int, default=5)
        parser.add_argument("--seed", type=int, default=0)
        self.add_output_argument(parser)

    def run(self, manifest, out_dir, **options):
        if options.get("embeddings"):
            path = Path(options["embeddings"])
            if not path.is_file():
                raise LoadError(f"embeddings file not found: {path}")
            manifest.inputs["embeddings"] = str(path)
            embeds = EmbeddingSet.from_csv(path.read_text(encoding="utf-8"), dataset_name=path.parent.name)
        elif options.get("checkpoint") and options.get("dataset"):
            embeds = embed_from_checkpoint(self, options["checkpoint"], options["dataset"], manifest)
        else:
            raise ArgumentError("give a checkpoint and a dataset, or --embeddings")

        manifest.seed = options["seed"]
        manifest.extra = {"folds": options["folds"], "repeats": options["repeats"]}
        result = kfold_eval(embeds, k=options["folds"], repeats=options["repeats"], seed=options["seed"])
        path = atomic_write_json(out_dir / "eval.json", result.to_dict())
        manifest.outputs = {"eval": str(path)}
        self.stdout.write(self.style.SUCCESS(result.summary_line()))
