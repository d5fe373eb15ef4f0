"""Simulation models, the Monte-Carlo harness and report I/O."""

from .harness import (
    METHODS,
    TABLE_NOISE_MULTIPLIER,
    RunConfig,
    RunReport,
    declared_total,
    reaggregate,
    run_benchmark,
    run_replication,
)
from .io import export_report, ingest_csv, load_report
from .models import ModelSpec, generate_model
