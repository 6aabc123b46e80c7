from lamp.management.base import LampCommand
from lamp.services.artifacts import atomic_write_json, atomic_write_text
from lamp.services.entropy_audit import Augmentation, audit_dataset


class Command(LampCommand):
    help = "Measure the structural-entropy damage an augmentation does to every graph of a dataset."

    command_name = "audit"

    def add_arguments(self, parser):
        parser.add_argument("dataset", help="Dataset directory, or a name under LAMP_DATA_DIR")
        parser.add_argument("augmentation", choices=Augmentation.values)
        parser.add_argument("strength", nargs="?", type=float, default=0.2)
        parser.add_argument("--repeats", type=int, default=5)
        parser.add_argument("--seed", type=int, default=0)
        self.add_output_argument(parser)

    def run(self, manifest, out_dir, **options):
        dataset = self.load_dataset(options["dataset"], manifest)
        manifest.config = {
            "augmentation": options["augmentation"],
            "strength": options["strength"],
            "repeats": options["repeats"],
        }
        report = audit_dataset(
            dataset,
            options["augmentation"],
            options["strength"],
            options["repeats"],
            options["seed"],
        )

        samples = atomic_write_text(out_dir / "damage.csv", report.to_csv())
        summary = atomic_write_json(out_dir / "summary.json", report.summary())
        manifest.outputs = {"damage": str(samples), "summary": str(summary)}

        self.stdout.write(
            self.style.SUCCESS(
                f"✅ {dataset.name} {report.augmentation}@{report.strength:g}: "
                f"mean {report.mean:.4f} ± {report.std:.4f} over {len(report.samples)} samples"
            )
        )
        negatives = int((report.values < 0).sum())
        if negatives:
            self.stdout.write(
                self.style.WARNING(f"  {negatives} samples gained entropy (negative change)")
            )
        if report.skipped_edgeless:
            self.stdout.write(f"  {report.skipped_edgeless} edgeless graphs skipped")
