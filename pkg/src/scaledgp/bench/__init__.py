from .config import ConfigError, load_config, parse_config
from .runner import emit_plotdata, run_autoparam, run_benchmark, run_groundtruth, run_simulate

__all__ = ["ConfigError", "emit_plotdata", "load_config", "parse_config", "run_autoparam", "run_benchmark",
           "run_groundtruth", "run_simulate"]
