"""Data ingestion, the simulation study and the command-line interface."""

from .io import DatasetSpec, ingest, write_generic_csv
from .study import StudyConfig, run_simulation_study

__all__ = ["DatasetSpec", "ingest", "write_generic_csv", "StudyConfig", "run_simulation_study"]
