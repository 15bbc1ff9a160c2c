from .config import ConfigError, ExperimentConfig
from .runner import ResultRecord, TrialError, emit_curve, run, run_trial

__all__ = ["ConfigError", "ExperimentConfig", "ResultRecord", "TrialError", "emit_curve", "run", "run_trial"]
