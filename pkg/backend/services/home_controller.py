"""The home-side decision entity.

A controller owns its home's appliance parameters and schedules; the
aggregator only ever sees the `HomeReport` it returns.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from backend.models.scenario import Environment, HomeSpec
from backend.models.schedule import HomeSolution
from backend.models.utility import UtilityPair
from backend.services.home_solver import SolverSettings, solve_home

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class HomeReport:
    home_id: int
    utility: UtilityPair
    greedients: np.ndarray


class HomeController:
    def __init__(self, home: HomeSpec, env: Environment, settings: Optional[SolverSettings] = None):
        self._home = home
        self._env = env
        self._settings = settings or SolverSettings()
        self._last: Optional[Tuple[Tuple[float, ...], HomeSolution]] = None

    @property
    def home_id(self) -> int:
        return self._home.id

    @property
    def subscribed_power(self) -> float:
        # part of the subscription contract, so the aggregator may know it
        return self._home.subscribed_power

    def solve(self, caps: Sequence[float]) -> HomeSolution:
        """Solve under `caps`; an unchanged row reuses the previous solution."""
        key = tuple(float(c) for c in caps)
        if self._last is not None and self._last[0] == key:
            return self._last[1]
        solution = solve_home(self._home, key, self._env, self._settings)
        self._last = (key, solution)
        return solution

    def respond(self, caps: Sequence[float]) -> HomeReport:
        """Solve under `caps` and report utility and greedients only."""
        solution = self.solve(caps)
        return HomeReport(self._home.id, solution.utility, solution.greedients)

    def __repr__(self):
        return f"<HomeController(home={self._home.id}, label='{self._home.label}')>"
