# sampling/models.py
from django.db import models


class RunRecord(models.Model):
    """Manifest of one command run; enough to replay it"""
    COMMANDS = [
        ('sample', 'Sample'),
        ('diagnose', 'Diagnose'),
        ('search', 'Search'),
        ('prop1', 'Proposition check'),
        ('metrics', 'Metrics'),
    ]

    command = models.CharField(max_length=20, choices=COMMANDS)
    options = models.JSONField(default=dict)
    config = models.JSONField(default=dict)
    config_hash = models.CharField(max_length=64, blank=True)
    seed = models.BigIntegerField(null=True, blank=True)
    tool_version = models.CharField(max_length=20)
    input_hashes = models.JSONField(default=dict)
    nfe_batches = models.IntegerField(null=True, blank=True)
    nfe_evals = models.IntegerField(null=True, blank=True)
    nfe_points = models.BigIntegerField(null=True, blank=True)
    outputs = models.JSONField(default=list)
    summary = models.JSONField(default=dict)
    output_dir = models.CharField(max_length=500)
    started_at = models.DateTimeField()
    finished_at = models.DateTimeField()
    elapsed_seconds = models.FloatField(default=0.0)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.command} seed={self.seed} ({self.config_hash[:12]})"
