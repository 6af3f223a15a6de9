"""Lexicographic schedule optimization for a single home under per-slot limits.

The solver is a backward dynamic program over (slot, washing phase, indoor
temperature). The washing phase is 0 before the run, k while the k-th slot
of the run is in progress and D once it has finished, so choosing the start
slot is part of the same pass. Temperatures live on a uniform grid and the
value-to-go is linearly interpolated between grid points; the forward pass
then re-decides every slot at the true (continuous) temperature, and the
chosen schedule is re-evaluated exactly with `evaluate_home`.
"""

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from backend import config
from backend.exceptions import PreconditionError
from backend.models.scenario import Environment, HomeSpec
from backend.models.schedule import HomeSolution, schedule_from_powers
from backend.models.utility import UtilityPair
from backend.services.appliance import (
    POWER_TOL,
    evaluate_home,
    heat_curve,
    heat_step,
    light_curve,
    wash_value,
)
from backend.services.greedient import greedient_home

logger = logging.getLogger(__name__)

NEG = -1.0e12  # value of unreachable states; finite so interpolation stays defined
DIGITS = 9  # utilities equal to this many decimals tie
MAX_GRID_LANDINGS = 256


@dataclass(frozen=True)
class SolverSettings:
    temp_grid: float = config.TEMP_GRID
    temp_ceiling: float = config.TEMP_CEILING
    scalarization: float = config.SCALARIZATION_WEIGHT

    def __post_init__(self):
        if self.temp_grid <= 0:
            raise PreconditionError("temperature grid step must be positive")


@dataclass(frozen=True)
class _Option:
    phase: int
    action: str  # wait | start | run | done
    next_phase: int
    bonus_vital: float = 0.0
    bonus_comfort: float = 0.0


@dataclass
class _Choice:
    vital: np.ndarray
    comfort: np.ndarray
    heat: np.ndarray
    light: np.ndarray
    washing: bool


def _lex_best(vital: np.ndarray, comfort: np.ndarray, power: np.ndarray) -> np.ndarray:
    """Index along the last axis maximizing (vital, comfort, -heat power)."""
    v = np.round(vital, DIGITS)
    c = np.round(comfort, DIGITS)
    c = np.where(v == v.max(axis=-1, keepdims=True), c, -np.inf)
    key = np.where(c == c.max(axis=-1, keepdims=True), -power, -np.inf)
    return np.argmax(key, axis=-1)


def _prefer(first: _Choice, second: _Choice) -> np.ndarray:
    """True where `first` is at least as good as `second`."""
    v1, v2 = np.round(first.vital, DIGITS), np.round(second.vital, DIGITS)
    c1, c2 = np.round(first.comfort, DIGITS), np.round(second.comfort, DIGITS)
    return (v1 > v2) | ((v1 == v2) & (c1 >= c2))


class _TemperatureGrid:
    def __init__(self, home: HomeSpec, env: Environment, settings: SolverSettings):
        if home.heating is None:
            # without heating the temperature is irrelevant: one dummy state
            self.lo, self.step = home.t_init, 1.0
            self.values = np.array([home.t_init])
            return
        self.step = settings.temp_grid
        self.lo = min(min(env.exterior_temp), home.t_init) - 1.0
        hi = max(settings.temp_ceiling, home.t_pref + self.step, home.t_init + self.step)
        size = int(math.floor((hi - self.lo) / self.step)) + 1
        self.values = self.lo + self.step * np.arange(size)

    @property
    def size(self) -> int:
        return len(self.values)

    def interpolate(self, table: np.ndarray, temps: np.ndarray) -> np.ndarray:
        """Evaluate rows of `table` (G, n) at `temps` (m, C); returns (G, m, C)."""
        if self.size == 1:
            return np.broadcast_to(table[:, :1, None], (table.shape[0],) + temps.shape)
        pos = (temps - self.lo) / self.step
        low = np.clip(np.floor(pos), 0, self.size - 2).astype(int)
        weight = np.clip(pos - low, 0.0, 1.0)
        return table[:, low] * (1.0 - weight) + table[:, low + 1] * weight


class _HomeProgram:
    """Backward tables and forward reconstruction for one (home, caps) pair."""

    def __init__(self, home: HomeSpec, caps: Tuple[float, ...], env: Environment, settings: SolverSettings):
        self.home = home
        self.caps = caps
        self.env = env
        self.settings = settings
        self.horizon = env.horizon
        self.grid = _TemperatureGrid(home, env, settings)
        washing = home.washing
        self.duration = washing.duration if washing is not None else 0
        self.phases = self.duration + 1
        heating = home.heating
        if heating is not None and heating.p_max > heating.p_min:
            span = heating.f_coeff * (heating.p_max - heating.p_min) / self.grid.step
            self.landings = min(int(math.ceil(span)) + 2, MAX_GRID_LANDINGS)
        else:
            self.landings = 0
        self.tables: List[Optional[Tuple[np.ndarray, np.ndarray]]] = [None] * (self.horizon + 1)

    def options(self, t: int) -> Tuple[List[_Option], List[_Option]]:
        """Options at 0-indexed slot t, split by whether the washer draws power."""
        idle = [_Option(0, "wait", 0)]
        busy: List[_Option] = []
        washing = self.home.washing
        if washing is None:
            return idle, busy
        slot = t + 1
        last = min(washing.latest_start, self.horizon - self.duration + 1)
        if washing.earliest_start <= slot <= last:
            vital, comfort = wash_value(slot, washing, self.horizon, self.env.u_max)
            first = 1 if self.duration > 1 else self.duration
            busy.append(_Option(0, "start", first, vital, comfort))
        for k in range(1, self.duration):
            busy.append(_Option(k, "run", k + 1))
        idle.append(_Option(self.duration, "done", self.duration))
        return idle, busy

    def heat_candidates(self, temps: np.ndarray, avail: float, t_ext: float) -> np.ndarray:
        """Heating powers worth trying per start temperature, (m, C); NaN is unusable."""
        m = len(temps)
        heating = self.home.heating
        if avail < 0:
            return np.full((m, 1), np.nan)
        if heating is None or avail < heating.p_min:
            return np.zeros((m, 1))
        f, g = heating.f_coeff, heating.g_coeff
        top = min(heating.p_max, avail)
        fixed = [0.0, heating.p_min, top]
        lighting = self.home.lighting
        if lighting is not None:
            fixed += [avail - lighting.p_min, avail - lighting.p_max]
        passive = heat_step(temps, 0.0, t_ext, f, g)
        columns = [np.full(m, value) for value in fixed]
        for target in (self.home.t_min, self.home.t_pref):
            columns.append((target - passive) / f)
        if self.landings:
            first = np.ceil((passive + f * heating.p_min - self.grid.lo) / self.grid.step - 1e-9)
            for k in range(self.landings):
                columns.append((self.grid.lo + (first + k) * self.grid.step - passive) / f)
        powers = np.stack(columns, axis=1)
        usable = (powers >= heating.p_min - POWER_TOL) & (powers <= top + POWER_TOL)
        powers = np.where(usable, np.clip(powers, heating.p_min, top), np.nan)
        powers[:, 0] = 0.0
        return powers

    def light_power(self, room: np.ndarray) -> np.ndarray:
        lighting = self.home.lighting
        if lighting is None:
            return np.zeros_like(room)
        light = np.where(room >= lighting.p_min - POWER_TOL, np.minimum(room, lighting.p_max), 0.0)
        light = np.where(np.abs(light - lighting.p_max) <= POWER_TOL, lighting.p_max, light)
        return np.where(light < 0, 0.0, light)

    def rewards(self, temps: np.ndarray, avail: float, t_ext: float):
        powers = self.heat_candidates(temps, avail, t_ext)
        valid = ~np.isnan(powers)
        heat = np.where(valid, powers, 0.0)
        heating = self.home.heating
        if heating is not None:
            next_temp = heat_step(temps[:, None], heat, t_ext, heating.f_coeff, heating.g_coeff)
        else:
            next_temp = np.broadcast_to(temps[:, None], heat.shape)
        light = self.light_power(max(avail, 0.0) - heat)
        vital = np.zeros_like(heat)
        comfort = np.zeros_like(heat)
        if self.home.lighting is not None:
            lv, lc = light_curve(light, self.home.lighting, self.env.u_max)
            vital, comfort = vital + lv, comfort + lc
        if heating is not None:
            hv, hc = heat_curve(next_temp, self.home, self.env.u_max, self.env.heat_vital_floor)
            vital, comfort = vital + hv, comfort + hc
        vital = np.where(valid, vital, NEG)
        comfort = np.where(valid, comfort, NEG)
        next_temp = np.where(valid, next_temp, self.grid.lo)
        return heat, light, next_temp, vital, comfort

    def slot_choices(self, t: int, temps: np.ndarray, phases=None) -> Dict[Tuple[int, str], _Choice]:
        """Best continuation of every option at slot t from each temperature."""
        next_vital, next_comfort = self.tables[t + 1]
        idle, busy = self.options(t)
        cap = self.caps[t]
        t_ext = self.env.exterior_temp[t]
        washer = self.home.washing.p_max if self.home.washing is not None else 0.0
        choices: Dict[Tuple[int, str], _Choice] = {}
        for group, avail, is_busy in ((idle, cap, False), (busy, cap - washer, True)):
            if phases is not None:
                group = [o for o in group if o.phase in phases]
            if not group:
                continue
            heat, light, next_temp, vital, comfort = self.rewards(temps, avail, t_ext)
            rows = [o.next_phase for o in group]
            total_v = vital[None] + self.grid.interpolate(next_vital[rows], next_temp)
            total_c = comfort[None] + self.grid.interpolate(next_comfort[rows], next_temp)
            total_v = total_v + np.array([o.bonus_vital for o in group])[:, None, None]
            total_c = total_c + np.array([o.bonus_comfort for o in group])[:, None, None]
            best = _lex_best(total_v, total_c, np.broadcast_to(heat, total_v.shape))
            pick = best[..., None]
            best_v = np.take_along_axis(total_v, pick, axis=-1)[..., 0]
            best_c = np.take_along_axis(total_c, pick, axis=-1)[..., 0]
            lanes = np.arange(len(temps))
            for index, option in enumerate(group):
                cols = best[index]
                choices[(option.phase, option.action)] = _Choice(
                    vital=best_v[index],
                    comfort=best_c[index],
                    heat=heat[lanes, cols],
                    light=light[lanes, cols],
                    washing=is_busy,
                )
        return choices

    def decide(self, phase: int, choices: Dict[Tuple[int, str], _Choice]) -> Tuple[str, _Choice]:
        if phase == 0:
            wait = choices[(0, "wait")]
            start = choices.get((0, "start"))
            if start is not None and bool(_prefer(start, wait)[0]):
                return "start", start
            return "wait", wait
        if phase < self.duration:
            return "run", choices[(phase, "run")]
        return "done", choices[(phase, "done")]

    def backward(self) -> None:
        n = self.grid.size
        vital = np.zeros((self.phases, n))
        comfort = np.zeros((self.phases, n))
        if self.duration > 0:
            # a run still in progress at the horizon is infeasible
            vital[1:self.duration] = NEG
            comfort[1:self.duration] = NEG
        self.tables[self.horizon] = (vital, comfort)
        temps = self.grid.values
        for t in reversed(range(self.horizon)):
            choices = self.slot_choices(t, temps)
            vital = np.full((self.phases, n), NEG)
            comfort = np.full((self.phases, n), NEG)
            wait = choices[(0, "wait")]
            start = choices.get((0, "start"))
            if start is not None:
                take = _prefer(start, wait)
                vital[0] = np.where(take, start.vital, wait.vital)
                comfort[0] = np.where(take, start.comfort, wait.comfort)
            else:
                vital[0], comfort[0] = wait.vital, wait.comfort
            for k in range(1, self.duration):
                vital[k], comfort[k] = choices[(k, "run")].vital, choices[(k, "run")].comfort
            if self.duration > 0:
                done = choices[(self.duration, "done")]
                vital[self.duration], comfort[self.duration] = done.vital, done.comfort
            # NEG propagates through sums; clamp so it never drifts further
            self.tables[t] = (np.maximum(vital, NEG), np.maximum(comfort, NEG))

    def forward(self):
        horizon = self.horizon
        light = np.zeros(horizon)
        heat = np.zeros(horizon)
        wash = np.zeros(horizon)
        wash_start = None
        phase = 0
        temp = self.home.t_init
        heating = self.home.heating
        washing = self.home.washing
        for t in range(horizon):
            choices = self.slot_choices(t, np.array([temp]), phases={phase})
            action, choice = self.decide(phase, choices)
            heat[t] = float(choice.heat[0])
            light[t] = float(choice.light[0])
            if choice.washing:
                wash[t] = washing.p_max
            if action == "start":
                wash_start = t + 1
                phase = 1 if self.duration > 1 else self.duration
            elif action == "run":
                phase += 1
            self._fit(t, light, heat, wash)
            if heating is not None:
                temp = heat_step(temp, heat[t], self.env.exterior_temp[t], heating.f_coeff, heating.g_coeff)
        return light, heat, wash, wash_start

    def _fit(self, t: int, light: np.ndarray, heat: np.ndarray, wash: np.ndarray) -> None:
        """Shave rounding residue so the slot total never exceeds its limit."""
        cap = self.caps[t]
        lighting, heating = self.home.lighting, self.home.heating
        while light[t] + heat[t] + wash[t] > cap:
            light_slack = light[t] - lighting.p_min if light[t] > 0 else -math.inf
            heat_slack = heat[t] - heating.p_min if heat[t] > 0 else -math.inf
            if light_slack == -math.inf and heat_slack == -math.inf:
                break
            if light_slack >= heat_slack:
                light[t] = np.nextafter(light[t], 0.0)
            else:
                heat[t] = np.nextafter(heat[t], 0.0)


def _check_caps(caps: Sequence[float], horizon: int) -> Tuple[float, ...]:
    values = tuple(float(c) for c in caps)
    if len(values) != horizon:
        raise PreconditionError(f"expected {horizon} capacity limits, got {len(values)}")
    if any(not math.isfinite(c) or c < 0 for c in values):
        raise PreconditionError("capacity limits must be finite and non-negative")
    return values


@lru_cache(maxsize=config.SOLVER_CACHE_SIZE)
def _solve_cached(home: HomeSpec, caps: Tuple[float, ...], env: Environment, settings: SolverSettings) -> HomeSolution:
    program = _HomeProgram(home, caps, env, settings)
    program.backward()
    light, heat, wash, wash_start = program.forward()
    schedule = schedule_from_powers(light, heat, wash, wash_start)
    utility, temps = evaluate_home(schedule, home, env)
    schedule = replace(schedule, temperature=temps, utility=utility)
    residual = np.maximum(np.asarray(caps) - schedule.totals(), 0.0)
    solution = HomeSolution(
        schedule=schedule,
        utility=utility,
        residual=residual,
        greedients=np.zeros(env.horizon),
        by_appliance={},
        increments=np.zeros(env.horizon),
    )
    return greedient_home(solution, home, caps, env, settings.scalarization)


def solve_home(
    home: HomeSpec,
    caps: Sequence[float],
    env: Environment,
    settings: Optional[SolverSettings] = None,
) -> HomeSolution:
    """Best schedule of `home` under the per-slot limits `caps`.

    Identical homes facing identical limits share one cached solution.
    """
    caps = _check_caps(caps, env.horizon)
    solution = _solve_cached(home.profile, caps, env, settings or SolverSettings())
    logger.debug(f"home {home.id}: utility {solution.utility.as_tuple()}")
    return solution


def max_utility_baseline(home: HomeSpec, env: Environment, settings: Optional[SolverSettings] = None) -> UtilityPair:
    """Utility the home reaches when every slot grants its full subscription."""
    return solve_home(home, [home.subscribed_power] * env.horizon, env, settings).utility
