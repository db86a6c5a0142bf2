"""Data ingestion, synthetic data, configuration and run orchestration."""

from .config import RunConfig, load_run_config
from .data import (FleetRecord, ResScaling, TimeSeriesBundle, fleet_units, ingest_timeseries,
                   read_fleet, write_fleet, write_timeseries)
from .report import emit_report, read_risk, solution_to_dict, write_comparison
from .run import RunResult, prepare_inputs, run_pipeline
from .synth import PROFILES, generate_synthetic_dataset

__all__ = [
    "RunConfig", "load_run_config", "FleetRecord", "ResScaling", "TimeSeriesBundle", "fleet_units",
    "ingest_timeseries", "read_fleet", "write_fleet", "write_timeseries", "emit_report", "read_risk",
    "solution_to_dict", "write_comparison", "RunResult", "prepare_inputs", "run_pipeline",
    "PROFILES", "generate_synthetic_dataset",
]
