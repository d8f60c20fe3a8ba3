"""Command-line orchestration of the full experiment pipeline."""
from .config import ExperimentConfig, load_config, parse, save_config, serialize
from .pipeline import STAGES, RunResult, StageOrderError, run_pipeline

__all__ = [
    "ExperimentConfig",
    "RunResult",
    "STAGES",
    "StageOrderError",
    "load_config",
    "parse",
    "run_pipeline",
    "save_config",
    "serialize",
]
