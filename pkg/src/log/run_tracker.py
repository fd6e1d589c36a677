"""Optional experiment tracking. Enabled by TRACK_RUNS; never touches command output."""

import sys
from typing import Dict, Optional

from util.verbosity import LOG_VERBOSITY, SUMMARY, TRACK_RUNS

EXPERIMENT = "hetero-partition"


def track_run(command: str, params: Dict[str, str], metrics: Dict[str, Optional[float]], enabled: bool = TRACK_RUNS):
    if not enabled:
        return
    try:
        import mlflow
        mlflow.set_experiment(EXPERIMENT)
        with mlflow.start_run(run_name=command):
            mlflow.log_params(params)
            mlflow.log_metrics({k: v for k, v in metrics.items() if v is not None})
    except Exception as e:
        if LOG_VERBOSITY >= SUMMARY:
            print(f"Warning: could not record run in mlflow: {e}", file=sys.stderr)
