"""Experiment harness: CLI, dataset I/O, synthetic settings and report emission."""
from .io import emit_report, load_dataset, write_csv, write_dataset
from .settings import ExperimentConfig, generate_setting
from .simulate import certificate_check, run_simulation

__all__ = ["ExperimentConfig", "generate_setting", "run_simulation", "certificate_check", "load_dataset",
           "emit_report", "write_csv", "write_dataset"]
