# forms.py
import logging

from django import forms

from lamp.policies.grids import off_grid_fields
from lamp.services.encoder import Readout
from lamp.services.entropy_audit import Augmentation
from lamp.services.exceptions import ConfigError
from lamp.services.losses import Denominator
from lamp.services.pruning import PruningStrategy
from lamp.services.trainer import TrainConfig, ViewMode

logger = logging.getLogger(__name__)


class TrainConfigForm(forms.Form):
    """
    Validates a pre-training config coming from a JSON file and/or command flags.

    Keys are exactly the TrainConfig fields. Range checks live here; whether a
    value is on the hyper-parameter search grid is decided by build_train_config.
    """

    # Architecture
    hidden_dim = forms.IntegerField(min_value=1)
    num_layers = forms.IntegerField(min_value=2)
    readout = forms.ChoiceField(choices=Readout.choices)

    # Optimization
    batch_size = forms.IntegerField(min_value=2)
    learning_rate = forms.FloatField(min_value=0.0)
    epochs = forms.IntegerField(min_value=1)
    seed = forms.IntegerField(min_value=0)

    # Contrast
    gamma = forms.FloatField(min_value=0.0, max_value=0.999999)
    alpha = forms.FloatField(min_value=0.0)
    tau = forms.FloatField(min_value=1e-6)
    strategy = forms.ChoiceField(choices=PruningStrategy.choices)
    n_s = forms.IntegerField(min_value=1)
    denominator = forms.ChoiceField(choices=Denominator.choices)

    # Baseline views
    view_mode = forms.ChoiceField(choices=ViewMode.choices)
    augmentation = forms.ChoiceField(choices=Augmentation.choices)
    aug_strength = forms.FloatField(min_value=0.0, max_value=0.999999)

    # Periodic evaluation
    eval_every = forms.IntegerField(min_value=0)
    eval_repeats = forms.IntegerField(min_value=0)

    check_finite = forms.BooleanField(required=False)
    allow_off_grid = forms.BooleanField(required=False)

    def clean(self):
        cleaned = super().clean()
        if cleaned.get("view_mode") == ViewMode.AUGMENTATION and cleaned.get("alpha"):
            self.add_error("alpha", "Must be 0 in augmentation view mode (views are not row-aligned).")
        if cleaned.get("learning_rate") == 0:
            self.add_error("learning_rate", "Must be positive.")
        return cleaned


def _render_errors(form: forms.Form) -> str:
    return "; ".join(
        f"{name}: {' '.join(messages)}" for name, messages in form.errors.items()
    )


def build_train_config(data: dict, *, base: TrainConfig | None = None) -> TrainConfig:
    """
    Merge ``data`` over ``base`` (defaults when omitted), validate, return a TrainConfig.

    Off-grid values raise unless allow_off_grid ends up set, in which case they
    are accepted with a warning.
    """
    valid_keys = TrainConfig.field_names()
    unknown = sorted(set(data) - set(valid_keys))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}", valid_keys=valid_keys)

    merged = {**(base or TrainConfig()).to_dict(), **data}
    form = TrainConfigForm(merged)
    if not form.is_valid():
        raise ConfigError(f"invalid config: {_render_errors(form)}")

    cleaned = form.cleaned_data
    off_grid = off_grid_fields(cleaned)
    if off_grid:
        described = ", ".join(f"{name}={cleaned[name]}" for name in off_grid)
        if not cleaned["allow_off_grid"]:
            raise ConfigError(
                f"{described} outside the search grid; set allow_off_grid to use it anyway"
            )
        logger.warning("Off-grid config accepted: %s", described)
    return TrainConfig(**{name: cleaned[name] for name in valid_keys})
