from acm.harness.bench import BenchRow, bench_index
from acm.harness.config import ExperimentConfig, Method
from acm.harness.experiment import RunReport, build_method, run_experiment
from acm.harness.report import emit_report, read_step_rows

__all__ = [
    "BenchRow",
    "ExperimentConfig",
    "Method",
    "RunReport",
    "bench_index",
    "build_method",
    "emit_report",
    "read_step_rows",
    "run_experiment",
]
