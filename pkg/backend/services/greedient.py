"""Per-slot greedients: the best utility gain per extra watt a home could use.

Each appliance is tried at its utility breakpoints while the rest of the
schedule stays fixed. Gains are scalarized as W_v * Δvital + Δcomfort. The
washing machine may also draw on residual capacity the home already has in
other slots, otherwise a multi-slot run could never show a gain.
"""

import logging
from dataclasses import replace
from typing import Dict, List, Sequence, Tuple

import numpy as np

from backend.models.scenario import ApplianceClass, Environment, HomeSpec
from backend.models.schedule import HomeSolution
from backend.services.appliance import POWER_TOL, heat_curve, light_curve, wash_value

logger = logging.getLogger(__name__)


def _best(candidates: List[Tuple[float, float]]) -> Tuple[float, float]:
    """(ratio, increment) with the largest ratio; ties go to the smaller increment."""
    best = (0.0, 0.0)
    for gain, delta in candidates:
        if delta <= POWER_TOL or gain <= 0:
            continue
        ratio = gain / delta
        if ratio > best[0] or (ratio == best[0] and delta < best[1]):
            best = (ratio, delta)
    return best


def _lighting(solution: HomeSolution, home: HomeSpec, env: Environment, weight: float):
    spec = home.lighting
    horizon = env.horizon
    ratios, deltas = np.zeros(horizon), np.zeros(horizon)
    power = solution.schedule.row(ApplianceClass.LIGHTING)
    vital, comfort = light_curve(power, spec, env.u_max)
    for t in range(horizon):
        reachable = power[t] + solution.residual[t]
        candidates = []
        for target in (spec.p_min, spec.p_max):
            new_vital, new_comfort = light_curve(target, spec, env.u_max)
            gain = weight * (new_vital - vital[t]) + (new_comfort - comfort[t])
            candidates.append((float(gain), target - reachable))
        ratios[t], deltas[t] = _best(candidates)
    return ratios, deltas


def _heating(solution: HomeSolution, home: HomeSpec, env: Environment, weight: float):
    spec = home.heating
    horizon = env.horizon
    ratios, deltas = np.zeros(horizon), np.zeros(horizon)
    power = solution.schedule.row(ApplianceClass.HEATING)
    temps = solution.schedule.temperature
    vital, comfort = heat_curve(temps, home, env.u_max, env.heat_vital_floor)
    current = weight * vital + comfort
    # a one-off temperature lift at slot t fades by (1 - G) every later slot
    decay = (1.0 - spec.g_coeff) ** np.arange(horizon)
    for t in range(horizon):
        reachable = power[t] + solution.residual[t]
        targets = {spec.p_min, spec.p_max}
        for level in (home.t_min, home.t_pref):
            lift = power[t] + (level - temps[t]) / spec.f_coeff
            targets.add(float(np.clip(lift, spec.p_min, spec.p_max)))
        candidates = []
        for target in sorted(targets):
            if target <= power[t]:
                continue
            shifted = temps[t:] + spec.f_coeff * (target - power[t]) * decay[:horizon - t]
            new_vital, new_comfort = heat_curve(shifted, home, env.u_max, env.heat_vital_floor)
            gain = float(np.sum(weight * new_vital + new_comfort) - np.sum(current[t:]))
            candidates.append((gain, target - reachable))
        ratios[t], deltas[t] = _best(candidates)
    return ratios, deltas


def _washing(solution: HomeSolution, home: HomeSpec, env: Environment, weight: float):
    spec = home.washing
    horizon = env.horizon
    ratios, deltas = np.zeros(horizon), np.zeros(horizon)
    duration = spec.duration
    current_start = solution.schedule.wash_start
    vital, comfort = wash_value(current_start, spec, horizon, env.u_max)
    current = weight * vital + comfort
    available = solution.residual.copy()
    if current_start is not None:
        available[current_start - 1:current_start - 1 + duration] += spec.p_max
    last = min(spec.latest_start, horizon - duration + 1)
    candidates: List[List[Tuple[float, float]]] = [[] for _ in range(horizon)]
    for start in range(spec.earliest_start, last + 1):
        if current_start is not None and start >= current_start:
            break
        new_vital, new_comfort = wash_value(start, spec, horizon, env.u_max)
        gain = weight * new_vital + new_comfort - current
        window = range(start - 1, start - 1 + duration)
        short = [u for u in window if available[u] < spec.p_max - POWER_TOL]
        # one slot's extra capacity can fund at most one short slot
        if len(short) == 1:
            u = short[0]
            candidates[u].append((gain, spec.p_max - available[u]))
    for t in range(horizon):
        ratios[t], deltas[t] = _best(candidates[t])
    return ratios, deltas


def greedient_home(
    solution: HomeSolution,
    home: HomeSpec,
    caps: Sequence[float],
    env: Environment,
    weight: float,
) -> HomeSolution:
    """Fill in g_ht, its per-appliance breakdown and the increments achieving it."""
    horizon = env.horizon
    by_appliance: Dict[ApplianceClass, np.ndarray] = {}
    increments: Dict[ApplianceClass, np.ndarray] = {}
    builders = {
        ApplianceClass.LIGHTING: _lighting,
        ApplianceClass.HEATING: _heating,
        ApplianceClass.WASHING: _washing,
    }
    for kind, builder in builders.items():
        if home.appliance(kind) is None:
            continue
        ratios, deltas = builder(solution, home, env, weight)
        ratios.setflags(write=False)
        by_appliance[kind] = ratios
        increments[kind] = deltas
    greedients = np.zeros(horizon)
    chosen = np.zeros(horizon)
    for kind, ratios in by_appliance.items():
        better = ratios > greedients
        greedients = np.where(better, ratios, greedients)
        chosen = np.where(better, increments[kind], chosen)
    return replace(solution, greedients=greedients, by_appliance=by_appliance, increments=chosen)
