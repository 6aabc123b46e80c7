import csv
import io
import logging

from lamp.forms import build_train_config
from lamp.management.base import LampCommand, add_config_arguments, collect_config
from lamp.policies.grids import SWEEP_AXES, is_on_grid, sweep_values
from lamp.services.artifacts import atomic_write_text
from lamp.services.evaluation import embed_dataset, kfold_eval
from lamp.services.exceptions import ConfigError, ServiceError
from lamp.services.trainer import pretrain

logger = logging.getLogger(__name__)

INTEGER_AXES = {"hidden_dim"}


class Command(LampCommand):
    help = "Pre-train and evaluate once per value of gamma, alpha or hidden_dim."

    command_name = "sweep"

    def add_arguments(self, parser):
        parser.add_argument("dataset", help="Dataset directory, or a name under LAMP_DATA_DIR")
        parser.add_argument("--axis", choices=SWEEP_AXES, required=True)
        parser.add_argument("--values", help="Comma-separated values (default: the axis grid)")
        parser.add_argument("--folds", type=int, default=10)
        parser.add_argument("--repeats", type=int, default=5)
        add_config_arguments(parser)
        self.add_output_argument(parser)

    def _values(self, axis, raw, allow_off_grid):
        if not raw:
            return list(sweep_values(axis))
        cast = int if axis in INTEGER_AXES else float
        try:
            values = [cast(v) for v in raw.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"--values: {exc}") from exc
        off = [v for v in values if not is_on_grid(axis, v)]
        if off and not allow_off_grid:
            raise ConfigError(
                f"{axis} values {off} are outside the search grid; pass --allow-off-grid"
            )
        return values

    def run(self, manifest, out_dir, **options):
        base, overrides = collect_config(options)
        axis = options["axis"]
        values = self._values(axis, options.get("values"), base.allow_off_grid)
        dataset = self.load_dataset(options["dataset"], manifest)
        manifest.config = base.to_dict()
        manifest.seed = base.seed
        manifest.extra = {"axis": axis, "values": values, "overrides": overrides}

        rows = []
        for value in values:
            try:
                config = build_train_config({axis: value}, base=base)
                result = pretrain(dataset, config)
                scores = kfold_eval(
                    embed_dataset(result.encoder, dataset, config.readout),
                    k=options["folds"],
                    repeats=options["repeats"],
                    seed=config.seed,
                )
            except ServiceError as exc:
                logger.warning("Sweep point %s=%s failed: %s", axis, value, exc)
                self.stdout.write(self.style.WARNING(f"  {axis}={value}: failed ({exc})"))
                rows.append((value, "", "", str(exc)))
                continue
            self.stdout.write(f"  {axis}={value}: {scores.summary_line()}")
            rows.append((value, repr(scores.mean), repr(scores.std), ""))

        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["value", "mean_acc", "std_acc", "error"])
        writer.writerows(rows)
        path = atomic_write_text(out_dir / "sweep.csv", buffer.getvalue())
        manifest.outputs = {"sweep": str(path)}

        failed = sum(1 for row in rows if row[3])
        style = self.style.WARNING if failed else self.style.SUCCESS
        self.stdout.write(style(f"✅ {len(rows) - failed}/{len(rows)} sweep points on {axis} done"))
