from .utility import UtilityPair, Ordering, utility_cmp, utility_add, utility_sum
from .scenario import (
    ApplianceClass,
    ApplianceSpec,
    HomeSpec,
    Environment,
    Scenario,
    parse_scenario,
    load_scenario,
    render_scenario,
)
from .schedule import CapacityPlan, HomeSchedule, HomeSolution
from .results import SweepRun, SweepPoint

__all__ = [
    "UtilityPair",
    "Ordering",
    "utility_cmp",
    "utility_add",
    "utility_sum",
    "ApplianceClass",
    "ApplianceSpec",
    "HomeSpec",
    "Environment",
    "Scenario",
    "parse_scenario",
    "load_scenario",
    "render_scenario",
    "CapacityPlan",
    "HomeSchedule",
    "HomeSolution",
    "SweepRun",
    "SweepPoint",
]
