"""Low-rank gradient compression with error feedback for simulated data-parallel training."""
from .cluster import RunConfig, RunResult, run
from .problems import ProblemSpec, make_problem

__all__ = ["RunConfig", "RunResult", "run", "ProblemSpec", "make_problem"]
__version__ = "0.1.0"
