from django.core.serializers.json import DjangoJSONEncoder
from django.db import models


class BaseModel(models.Model):
    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        abstract = True


class Run(BaseModel):
    """One command invocation and the manifest it wrote."""

    class Command(models.TextChoices):
        AUDIT = "audit", "Entropy audit"
        PRETRAIN = "pretrain", "Pre-training"
        EMBED = "embed", "Embedding export"
        EVAL = "eval", "10-fold evaluation"
        SWEEP = "sweep", "Hyper-parameter sweep"

    class Status(models.TextChoices):
        SUCCEEDED = "succeeded", "Succeeded"
        FAILED = "failed", "Failed"

    command = models.CharField(max_length=20, choices=Command.choices)
    status = models.CharField(
        max_length=20, choices=Status.choices, default=Status.SUCCEEDED
    )
    dataset_name = models.CharField(max_length=100, blank=True)
    seed = models.BigIntegerField(default=0)

    # Snapshots
    config = models.JSONField(default=dict, blank=True, encoder=DjangoJSONEncoder)
    manifest = models.JSONField(default=dict, blank=True, encoder=DjangoJSONEncoder)

    out_dir = models.CharField(max_length=500, blank=True)
    wall_clock_seconds = models.FloatField(default=0.0)
    error = models.TextField(blank=True)

    class Meta:
        ordering = ["-created_at", "-id"]

    def __str__(self):
        return f"{self.command} {self.dataset_name} ({self.status})"

    @property
    def succeeded(self) -> bool:
        return self.status == self.Status.SUCCEEDED
