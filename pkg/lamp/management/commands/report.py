import json

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError

from lamp.models import Run
from lamp.policies.datasets import resolve_dataset_dir
from lamp.services.exceptions import ServiceError
from lamp.services.graph_core import dataset_statistics, prepare_dataset


class Command(BaseCommand):
    help = "Show dataset statistics and the most recent runs."

    def add_arguments(self, parser):
        parser.add_argument("--dataset", help="Dataset directory, or a name under LAMP_DATA_DIR")
        parser.add_argument("--runs", type=int, default=10, help="How many recent runs to list")
        parser.add_argument("--json", action="store_true", help="Print dataset metadata as JSON")

    def handle(self, *args, **options):
        if options.get("dataset"):
            self._dataset(options["dataset"], options["json"])
        if options["runs"] > 0 and not options["json"]:
            self._runs(options["runs"])

    def _dataset(self, name, as_json):
        directory = resolve_dataset_dir(name, settings.LAMP_DATA_DIR)
        try:
            dataset = prepare_dataset(directory, settings.LAMP_MAX_DEGREE)
        except ServiceError as exc:
            raise CommandError(str(exc), returncode=1) from exc

        if as_json:
            self.stdout.write(json.dumps(dataset.describe(), indent=2, sort_keys=True))
            return
        stats = dataset_statistics(dataset)
        self.stdout.write(self.style.SUCCESS(f"{stats['name']}"))
        self.stdout.write(f"  graphs       {stats['graphs']}")
        self.stdout.write(f"  classes      {stats['classes']} (labels {stats['label_values']})")
        self.stdout.write(f"  nodes        {stats['avg_nodes']:.2f} ± {stats['std_nodes']:.2f}")
        self.stdout.write(f"  edges        {stats['avg_edges']:.2f}")
        self.stdout.write(f"  feature dim  {stats['feature_dim']}")
        self.stdout.write(f"  majority     {stats['majority_rate'] * 100:.1f}%")

    def _runs(self, limit):
        try:
            runs = list(Run.objects.all()[:limit])
        except DatabaseError as exc:
            self.stdout.write(self.style.WARNING(f"No run history available: {exc}"))
            return
        if not runs:
            self.stdout.write("No runs recorded yet.")
            return
        self.stdout.write(self.style.SUCCESS(f"Last {len(runs)} runs"))
        for run in runs:
            style = self.style.SUCCESS if run.succeeded else self.style.WARNING
            line = (
                f"  {run.created_at:%Y-%m-%d %H:%M} {run.command:<9} {run.dataset_name:<16} "
                f"seed {run.seed:<4} {run.wall_clock_seconds:7.1f}s {run.status}"
            )
            self.stdout.write(style(line))
            if run.error:
                self.stdout.write(f"    {run.error}")
