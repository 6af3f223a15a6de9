"""Appliance utility shapes, indoor temperature dynamics and schedule evaluation.

The curve helpers accept numpy arrays so the home solver can evaluate whole
candidate grids at once; the named operations wrap them for single values.
"""

import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np

from backend.exceptions import PreconditionError, ScheduleViolation
from backend.models.scenario import ApplianceClass, ApplianceSpec, Environment, HomeSpec
from backend.models.schedule import HomeSchedule
from backend.models.utility import UtilityPair, utility_sum

logger = logging.getLogger(__name__)

POWER_TOL = 1e-9  # watts; powers this close to a threshold count as reaching it


def heat_step(t_prev, heat_power, t_ext, f_coeff: float, g_coeff: float):
    return t_prev + f_coeff * heat_power + g_coeff * (t_ext - t_prev)


def light_curve(power, spec: ApplianceSpec, u_max: float) -> Tuple[np.ndarray, np.ndarray]:
    power = np.asarray(power, dtype=float)
    lit = power >= spec.p_min - POWER_TOL
    vital = u_max * lit
    if spec.p_max > spec.p_min:
        comfort = u_max * np.clip((power - spec.p_min) / (spec.p_max - spec.p_min), 0.0, 1.0)
    else:
        comfort = u_max * lit
    return vital, comfort


def heat_curve(temp, home: HomeSpec, u_max: float, vital_floor: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    temp = np.asarray(temp, dtype=float)
    vital = u_max * np.clip((temp - vital_floor) / (home.t_min - vital_floor), 0.0, 1.0)
    comfort = u_max * np.clip((temp - home.t_min) / (home.t_pref - home.t_min), 0.0, 1.0)
    return vital, comfort


def wash_value(start: Optional[int], spec: ApplianceSpec, horizon: int, u_max: float) -> Tuple[float, float]:
    if start is None:
        return 0.0, 0.0
    weight = u_max * horizon
    latest = spec.latest_start
    if latest == spec.earliest_start:
        return weight, weight
    return weight, weight * (latest - start) / (latest - spec.earliest_start)


def light_utility(power: float, spec: ApplianceSpec, u_max: float) -> UtilityPair:
    if 0 < power < spec.p_min - POWER_TOL:
        raise PreconditionError(f"lighting power {power} W is below its minimum {spec.p_min} W")
    vital, comfort = light_curve(power, spec, u_max)
    return UtilityPair(float(vital), float(comfort))


def heat_utility(temp: float, home: HomeSpec, u_max: float, vital_floor: float = 0.0) -> UtilityPair:
    vital, comfort = heat_curve(temp, home, u_max, vital_floor)
    return UtilityPair(float(vital), float(comfort))


def wash_utility(wash_start: Optional[int], spec: ApplianceSpec, horizon: int, u_max: float) -> UtilityPair:
    if wash_start is not None and not (spec.earliest_start <= wash_start <= spec.latest_start):
        raise PreconditionError(
            f"washing start {wash_start} outside [{spec.earliest_start}, {spec.latest_start}]"
        )
    return UtilityPair(*wash_value(wash_start, spec, horizon, u_max))


def temperature_trajectory(home: HomeSpec, heat: Sequence[float], exterior: Sequence[float]) -> np.ndarray:
    """Indoor temperature at the end of each slot, starting from t_init."""
    heating = home.heating
    temps = np.empty(len(exterior))
    current = home.t_init
    for t, t_ext in enumerate(exterior):
        power = heat[t] if heating is not None else 0.0
        if heating is not None:
            current = heat_step(current, power, t_ext, heating.f_coeff, heating.g_coeff)
        temps[t] = current
    return temps


def check_schedule(schedule: HomeSchedule, home: HomeSpec, horizon: int) -> None:
    """Raise ScheduleViolation naming the first appliance/slot out of bounds."""
    for row, kind in enumerate((ApplianceClass.LIGHTING, ApplianceClass.HEATING, ApplianceClass.WASHING)):
        spec = home.appliance(kind)
        power = schedule.power[row]
        active = schedule.active[row]
        for t in range(horizon):
            if spec is None or not active[t]:
                if power[t] != 0:
                    raise ScheduleViolation(f"inactive appliance draws {power[t]} W", kind.value, t + 1)
                continue
            if power[t] < spec.p_min - POWER_TOL or power[t] > spec.p_max + POWER_TOL:
                raise ScheduleViolation(
                    f"power {power[t]} W outside [{spec.p_min}, {spec.p_max}]", kind.value, t + 1
                )
    washing = home.washing
    running = schedule.active[2]
    if washing is None:
        if schedule.wash_start is not None:
            raise ScheduleViolation("home has no washing machine", ApplianceClass.WASHING.value, None)
        return
    if schedule.wash_start is None:
        if running.any():
            raise ScheduleViolation("runs without a start slot", ApplianceClass.WASHING.value, None)
        return
    start = schedule.wash_start
    if not (washing.earliest_start <= start <= min(washing.latest_start, horizon - washing.duration + 1)):
        raise ScheduleViolation("start outside its window", ApplianceClass.WASHING.value, start)
    expected = np.zeros(horizon, dtype=bool)
    expected[start - 1:start - 1 + washing.duration] = True
    if not np.array_equal(running, expected):
        raise ScheduleViolation("run is not one contiguous block from its start", ApplianceClass.WASHING.value, start)


def evaluate_home(schedule: HomeSchedule, home: HomeSpec, env: Environment) -> Tuple[UtilityPair, np.ndarray]:
    """Utility of a fixed schedule and its recomputed temperature trajectory."""
    horizon = env.horizon
    check_schedule(schedule, home, horizon)
    temps = temperature_trajectory(home, schedule.power[1], env.exterior_temp)
    parts = []
    if home.lighting is not None:
        vital, comfort = light_curve(schedule.power[0], home.lighting, env.u_max)
        parts.append(UtilityPair(math.fsum(vital), math.fsum(comfort)))
    if home.heating is not None:
        vital, comfort = heat_curve(temps, home, env.u_max, env.heat_vital_floor)
        parts.append(UtilityPair(math.fsum(vital), math.fsum(comfort)))
    if home.washing is not None:
        parts.append(UtilityPair(*wash_value(schedule.wash_start, home.washing, horizon, env.u_max)))
    return utility_sum(parts), temps
