from .home_solver import SolverSettings, solve_home
from .home_controller import HomeController
from .aggregator import SgConfig, async_reallocate, gm_solve_tiny, lm_allocate, sg_run
from .harness import SweepSettings, oracle_check, run_sweep

__all__ = [
    "SolverSettings",
    "solve_home",
    "HomeController",
    "SgConfig",
    "lm_allocate",
    "sg_run",
    "gm_solve_tiny",
    "async_reallocate",
    "SweepSettings",
    "run_sweep",
    "oracle_check",
]
