"""Exhaustive oracles over grid-quantized schedules, for tiny instances only.

`brute_force_home` checks the home solver; `gm_search` solves the joint
problem over all homes and backs the GM reference scheme.
"""

import itertools
import logging
from dataclasses import dataclass, replace
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from backend import config
from backend.exceptions import InstanceTooLargeError
from backend.models.scenario import ApplianceClass, ApplianceSpec, Environment, HomeSpec, Scenario
from backend.models.schedule import CapacityPlan, HomeSchedule, HomeSolution, schedule_from_powers
from backend.models.utility import UtilityPair, utility_sum
from backend.services.appliance import POWER_TOL, evaluate_home, heat_curve, heat_step, light_curve, wash_value
from backend.services.greedient import greedient_home
from backend.services.home_solver import SolverSettings, solve_home

logger = logging.getLogger(__name__)

MAX_ORACLE_HORIZON = 8
MAX_GM_HOMES = 3
MAX_GM_HORIZON = 4
CHUNK = 65536
DIGITS = 9


def power_levels(spec: Optional[ApplianceSpec], grid: float, limit: float) -> List[float]:
    """0, p_min and every multiple of `grid` above p_min up to p_max, all within `limit`."""
    levels = [0.0]
    if spec is None or spec.p_min > limit + POWER_TOL:
        return levels
    levels.append(spec.p_min)
    step = int(np.floor(spec.p_min / grid)) + 1
    while step * grid <= min(spec.p_max, limit) + POWER_TOL:
        levels.append(min(step * grid, spec.p_max))
        step += 1
    return levels


def wash_starts(home: HomeSpec, horizon: int) -> List[Optional[int]]:
    """Every admissible start in ascending order, then no run at all."""
    washing = home.washing
    if washing is None:
        return [None]
    last = min(washing.latest_start, horizon - washing.duration + 1)
    return list(range(washing.earliest_start, last + 1)) + [None]


def _wash_row(home: HomeSpec, start: Optional[int], horizon: int) -> np.ndarray:
    row = np.zeros(horizon)
    if start is not None:
        row[start - 1:start - 1 + home.washing.duration] = home.washing.p_max
    return row


def _chunks(options: Sequence[Sequence[float]]) -> Iterator[np.ndarray]:
    product = itertools.product(*options)
    while True:
        block = list(itertools.islice(product, CHUNK))
        if not block:
            return
        yield np.array(block, dtype=float)


def _heat_scores(home: HomeSpec, heat: np.ndarray, env: Environment) -> Tuple[np.ndarray, np.ndarray]:
    """Vital and comfort of heating for each row of per-slot powers (N, T)."""
    heating = home.heating
    if heating is None:
        zeros = np.zeros(heat.shape[0])
        return zeros, zeros
    temp = np.full(heat.shape[0], home.t_init)
    vital = np.zeros(heat.shape[0])
    comfort = np.zeros(heat.shape[0])
    for t, t_ext in enumerate(env.exterior_temp):
        temp = heat_step(temp, heat[:, t], t_ext, heating.f_coeff, heating.g_coeff)
        v, c = heat_curve(temp, home, env.u_max, env.heat_vital_floor)
        vital += v
        comfort += c
    return vital, comfort


def _better(candidate: Tuple[float, float], incumbent: Optional[Tuple[float, float]]) -> bool:
    if incumbent is None:
        return True
    a = (round(candidate[0], DIGITS), round(candidate[1], DIGITS))
    b = (round(incumbent[0], DIGITS), round(incumbent[1], DIGITS))
    return a > b


def brute_force_home(
    home: HomeSpec,
    caps: Sequence[float],
    env: Environment,
    power_grid: float,
    weight: float = config.SCALARIZATION_WEIGHT,
) -> HomeSolution:
    """Lexicographic best over every grid-quantized schedule of one home.

    Lighting takes the largest grid level that fits next to heating and
    washing, which is optimal because more light never lowers utility.
    """
    horizon = env.horizon
    if horizon > MAX_ORACLE_HORIZON:
        raise InstanceTooLargeError(f"brute force needs t_M <= {MAX_ORACLE_HORIZON}, got {horizon}")
    caps = np.asarray(caps, dtype=float)
    starts = [s for s in wash_starts(home, horizon) if np.all(_wash_row(home, s, horizon) <= caps)]
    per_slot = [power_levels(home.heating, power_grid, c) for c in caps]
    size = len(starts) * int(np.prod([len(levels) for levels in per_slot]))
    if size > config.ORACLE_MAX_SCHEDULES:
        raise InstanceTooLargeError(f"{size} schedules exceed the oracle bound {config.ORACLE_MAX_SCHEDULES}")
    light_levels = np.array(power_levels(home.lighting, power_grid, np.inf))

    best: Optional[Tuple[float, float]] = None
    best_powers = None
    for start in starts:
        wash = _wash_row(home, start, horizon)
        wash_v, wash_c = wash_value(start, home.washing, horizon, env.u_max) if home.washing else (0.0, 0.0)
        options = [[p for p in levels if p <= caps[t] - wash[t] + POWER_TOL] for t, levels in enumerate(per_slot)]
        for heat in _chunks(options):
            room = caps[None, :] - wash[None, :] - heat
            fits = light_levels[None, None, :] <= room[:, :, None] + POWER_TOL
            light = np.where(fits, light_levels[None, None, :], 0.0).max(axis=2)
            vital, comfort = _heat_scores(home, heat, env)
            if home.lighting is not None:
                lv, lc = light_curve(light, home.lighting, env.u_max)
                vital, comfort = vital + lv.sum(axis=1), comfort + lc.sum(axis=1)
            vital, comfort = vital + wash_v, comfort + wash_c
            v, c = np.round(vital, DIGITS), np.round(comfort, DIGITS)
            candidates = np.flatnonzero(v == v.max())
            candidates = candidates[c[candidates] == c[candidates].max()]
            pick = candidates[np.argmin(heat[candidates].sum(axis=1))]
            if _better((vital[pick], comfort[pick]), best):
                best = (float(vital[pick]), float(comfort[pick]))
                best_powers = (light[pick].copy(), heat[pick].copy(), wash, start)

    light, heat, wash, start = best_powers
    schedule = schedule_from_powers(light, heat, wash, start)
    utility, temps = evaluate_home(schedule, home, env)
    schedule = replace(schedule, temperature=temps, utility=utility)
    solution = HomeSolution(
        schedule=schedule,
        utility=utility,
        residual=np.maximum(caps - schedule.totals(), 0.0),
        greedients=np.zeros(horizon),
        by_appliance={},
        increments=np.zeros(horizon),
    )
    return greedient_home(solution, home, caps, env, weight)


@dataclass(frozen=True)
class GmResult:
    plan: CapacityPlan
    schedules: Tuple[HomeSchedule, ...]
    utility: UtilityPair
    per_home: Tuple[UtilityPair, ...]


@dataclass(frozen=True)
class _Candidate:
    heat: Tuple[float, ...]
    wash_start: Optional[int]
    usage: Tuple[float, ...]
    vital: float
    comfort: float


def _slot_levels(home: HomeSpec, grid: float, room: float, temp: float, t_ext: float) -> List[float]:
    """Grid levels plus the continuous breakpoints of one slot's heating power.

    The breakpoints are the whole room, the room left after minimal or full
    lighting, and the powers that bring the next temperature to t_min or t_pref.
    """
    heating = home.heating
    levels = power_levels(heating, grid, room)
    top = min(heating.p_max, room)
    if heating.p_min > top + POWER_TOL:
        return levels
    extras = [top]
    if home.lighting is not None:
        extras += [room - home.lighting.p_min, room - home.lighting.p_max]
    passive = heat_step(temp, 0.0, t_ext, heating.f_coeff, heating.g_coeff)
    extras += [(target - passive) / heating.f_coeff for target in (home.t_min, home.t_pref)]
    for power in extras:
        if heating.p_min - POWER_TOL <= power <= top + POWER_TOL:
            levels.append(min(max(power, heating.p_min), top))
    return sorted({round(p, DIGITS) for p in levels})


def _heat_rows(home: HomeSpec, env: Environment, room: np.ndarray, grid: float) -> np.ndarray:
    """Every heating row built from `_slot_levels`, following the temperature it produces."""
    horizon = env.horizon
    heating = home.heating
    if heating is None:
        return np.zeros((1, horizon))
    rows: List[Tuple[float, ...]] = []

    def extend(t: int, temp: float, prefix: Tuple[float, ...]) -> None:
        if t == horizon:
            rows.append(prefix)
            return
        t_ext = env.exterior_temp[t]
        for power in _slot_levels(home, grid, room[t], temp, t_ext):
            if len(rows) > config.GM_MAX_COMBINATIONS:
                raise InstanceTooLargeError(f"more than {config.GM_MAX_COMBINATIONS} heating rows for home {home.id}")
            extend(t + 1, heat_step(temp, power, t_ext, heating.f_coeff, heating.g_coeff), prefix + (power,))

    extend(0, home.t_init, ())
    return np.array(rows, dtype=float)


def _candidates(home: HomeSpec, env: Environment, heat: np.ndarray, start: Optional[int]) -> List[_Candidate]:
    wash = _wash_row(home, start, env.horizon)
    wash_v, wash_c = wash_value(start, home.washing, env.horizon, env.u_max) if home.washing else (0.0, 0.0)
    vital, comfort = _heat_scores(home, heat, env)
    return [
        _Candidate(
            heat=tuple(heat[row]),
            wash_start=start,
            usage=tuple(heat[row] + wash),
            vital=float(vital[row] + wash_v),
            comfort=float(comfort[row] + wash_c),
        )
        for row in range(heat.shape[0])
    ]


def _home_candidates(home: HomeSpec, env: Environment, capacity: np.ndarray, grid: float) -> List[_Candidate]:
    candidates = []
    for start in wash_starts(home, env.horizon):
        wash = _wash_row(home, start, env.horizon)
        if np.any(wash > capacity + POWER_TOL):
            continue
        candidates += _candidates(home, env, _heat_rows(home, env, capacity - wash, grid), start)
    return candidates


def _response_candidates(
    home: HomeSpec,
    index: int,
    env: Environment,
    plans: Sequence[CapacityPlan],
    settings: Optional[SolverSettings],
) -> List[_Candidate]:
    """The home solver's own schedule under each plan's limits for this home."""
    candidates = []
    for plan in plans:
        schedule = solve_home(home, plan.limits[index], env, settings).schedule
        heat = schedule.row(ApplianceClass.HEATING)[None, :]
        candidates += _candidates(home, env, heat, schedule.wash_start)
    return candidates


def _prune(candidates: List[_Candidate]) -> List[_Candidate]:
    """Drop candidates another one matches or beats while drawing no more power in any slot."""
    ranked = sorted(
        candidates,
        key=lambda c: (-round(c.vital, DIGITS), -round(c.comfort, DIGITS), sum(c.usage)),
    )
    kept: List[_Candidate] = []
    usage = np.empty((0, len(ranked[0].usage))) if ranked else None
    for candidate in ranked:
        row = np.asarray(candidate.usage)
        if len(kept) and np.any(np.all(usage <= row[None, :] + POWER_TOL, axis=1)):
            continue
        kept.append(candidate)
        usage = np.vstack([usage, row])
    return kept


class _LightFill:
    """Best per-slot lighting for a fixed set of homes, as a function of spare power."""

    def __init__(self, homes: Sequence[HomeSpec], u_max: float):
        self.lamps = [(i, h.lighting) for i, h in enumerate(homes) if h.lighting is not None]
        self.u_max = u_max
        self.memo: Dict[float, Tuple[float, float, Tuple[float, ...]]] = {}
        self.size = len(homes)

    def __call__(self, spare: float) -> Tuple[float, float, Tuple[float, ...]]:
        key = round(spare, DIGITS)
        if key not in self.memo:
            self.memo[key] = self._fill(spare)
        return self.memo[key]

    def _fill(self, spare: float):
        best = None
        for count in range(len(self.lamps), -1, -1):
            for subset in itertools.combinations(self.lamps, count):
                base = sum(spec.p_min for _, spec in subset)
                if base > spare + POWER_TOL:
                    continue
                powers = [0.0] * self.size
                comfort = 0.0
                left = max(spare - base, 0.0)
                # spend what is left on the steepest comfort slopes first
                ranked = sorted(subset, key=lambda item: -self._slope(item[1]))
                for index, spec in ranked:
                    extra = min(spec.p_max - spec.p_min, left)
                    left -= extra
                    powers[index] = spec.p_min + extra
                    _, c = light_curve(powers[index], spec, self.u_max)
                    comfort += float(c)
                value = (self.u_max * count, comfort, tuple(powers))
                if best is None or _better(value[:2], best[:2]):
                    best = value
            if best is not None and best[0] == self.u_max * count:
                return best
        return best

    @staticmethod
    def _slope(spec: ApplianceSpec) -> float:
        return np.inf if spec.p_max == spec.p_min else 1.0 / (spec.p_max - spec.p_min)



def gm_search(
    scenario: Scenario,
    power_grid: float,
    reference_plans: Sequence[CapacityPlan] = (),
    settings: Optional[SolverSettings] = None,
) -> GmResult:
    """Joint lexicographic optimum over all homes under the shared capacity.

    Each home's heating and washing choices are its grid schedules, the
    continuous breakpoints of `_slot_levels`, and its solver response to every
    plan in `reference_plans`; lighting is then filled exactly per slot.
    """
    homes = scenario.homes
    env = scenario.environment
    horizon = scenario.horizon
    if len(homes) > MAX_GM_HOMES or horizon > MAX_GM_HORIZON:
        raise InstanceTooLargeError(
            f"GM oracle handles at most {MAX_GM_HOMES} homes and {MAX_GM_HORIZON} slots"
        )
    capacity = np.asarray(scenario.capacity, dtype=float)
    per_home = [
        _prune(
            _home_candidates(home, env, capacity, power_grid)
            + _response_candidates(home, index, env, reference_plans, settings)
        )
        for index, home in enumerate(homes)
    ]
    combinations = int(np.prod([len(c) for c in per_home]))
    if combinations > config.GM_MAX_COMBINATIONS:
        raise InstanceTooLargeError(
            f"{combinations} joint schedules exceed the GM bound {config.GM_MAX_COMBINATIONS}"
        )
    logger.info(f"GM: enumerating {combinations} joint schedules for {len(homes)} homes")
    fill = _LightFill(homes, env.u_max)

    best = None
    best_choice = None
    for combo in itertools.product(*per_home):
        usage = np.sum([c.usage for c in combo], axis=0)
        if np.any(usage > capacity + POWER_TOL):
            continue
        vital = sum(c.vital for c in combo)
        comfort = sum(c.comfort for c in combo)
        lights = []
        for t in range(horizon):
            lv, lc, powers = fill(max(capacity[t] - usage[t], 0.0))
            vital += lv
            comfort += lc
            lights.append(powers)
        if _better((vital, comfort), best):
            best = (vital, comfort)
            best_choice = (combo, lights)

    combo, lights = best_choice
    schedules = []
    for index, (home, candidate) in enumerate(zip(homes, combo)):
        light = [lights[t][index] for t in range(horizon)]
        wash = _wash_row(home, candidate.wash_start, horizon)
        schedule = schedule_from_powers(light, candidate.heat, wash, candidate.wash_start)
        utility, temps = evaluate_home(schedule, home, env)
        schedules.append(replace(schedule, temperature=temps, utility=utility))
    plan = CapacityPlan(np.array([s.totals() for s in schedules]))
    per_home_utility = tuple(s.utility for s in schedules)
    return GmResult(plan, tuple(schedules), utility_sum(per_home_utility), per_home_utility)
