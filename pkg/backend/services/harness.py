"""Capacity sweeps across allocation schemes, normalized per home class.

A sweep runs every requested scheme at every total capacity and reports, per
home class, utility relative to the class's maximal feasible utility.
Results are written as a fixed-format CSV so that reruns compare byte for
byte.
"""

import logging
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from backend import config
from backend.exceptions import PreconditionError
from backend.models.scenario import ApplianceClass, Environment, HomeSpec, Scenario
from backend.models.schedule import CapacityPlan
from backend.models.utility import UtilityPair, utility_sum
from backend.services.aggregator import SgConfig, SgTrace, gm_solve_tiny, lm_allocate, sg_run
from backend.services.home_solver import SolverSettings, max_utility_baseline, solve_home
from backend.services.oracle import brute_force_home

logger = logging.getLogger(__name__)

SCHEMES = ("GM", "LM", "SG1", "SG2")
COLUMNS = ["capacity", "scheme", "class", "rel_vital", "rel_comfort", "iters_to_best", "wall_s"]
TRACE_COLUMNS = ["k", "step", "total_vital", "total_comfort", "best", "best_k"]
FLOAT_FORMAT = "%.6g"
RELATIVE_EPS = 1e-9


def _sig(value: float) -> float:
    """Round to the precision the CSV keeps, so parsed files compare equal."""
    return float(FLOAT_FORMAT % value)


@dataclass(frozen=True)
class SweepRow:
    capacity: float
    scheme: str
    label: str
    rel_vital: float
    rel_comfort: float
    iters_to_best: int
    wall_s: float = 0.0

    def as_record(self) -> Dict:
        return {
            "capacity": self.capacity,
            "scheme": self.scheme,
            "class": self.label,
            "rel_vital": self.rel_vital,
            "rel_comfort": self.rel_comfort,
            "iters_to_best": self.iters_to_best,
            "wall_s": self.wall_s,
        }


@dataclass
class SweepResult:
    rows: List[SweepRow] = field(default_factory=list)
    totals: Dict[Tuple[str, float], UtilityPair] = field(default_factory=dict)
    traces: Dict[Tuple[str, float], SgTrace] = field(default_factory=dict)

    def sorted(self, labels: Sequence[str] = ()) -> "SweepResult":
        label_rank = {label: i for i, label in enumerate(labels)}

        def key(row: SweepRow):
            return (SCHEMES.index(row.scheme), row.capacity, label_rank.get(row.label, len(label_rank)), row.label)

        return replace(self, rows=sorted(self.rows, key=key))

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([row.as_record() for row in self.rows], columns=COLUMNS)
        return frame.astype({"iters_to_best": int}) if len(frame) else frame

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            self.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT)
        except OSError as e:
            raise OSError(f"cannot write sweep results to {path}: {e}") from e
        logger.info(f"Wrote {len(self.rows)} sweep rows to {path}")
        return path


def read_sweep_csv(path: Union[str, Path]) -> SweepResult:
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype={"scheme": str, "class": str}, keep_default_na=False)
    except OSError as e:
        raise OSError(f"cannot read sweep results from {path}: {e}") from e
    rows = [
        SweepRow(
            capacity=float(r["capacity"]),
            scheme=r["scheme"],
            label=r["class"],
            rel_vital=float(r["rel_vital"]),
            rel_comfort=float(r["rel_comfort"]),
            iters_to_best=int(r["iters_to_best"]),
            wall_s=float(r["wall_s"]),
        )
        for r in frame.to_dict("records")
    ]
    return SweepResult(rows=rows)


def default_capacity_grid(homes: int, points: int = config.SWEEP_POINTS) -> List[float]:
    """Log-spaced totals over [1e4, 2e5] W per 100 homes."""
    return [float(c) for c in np.geomspace(1e4, 2e5, points) * homes / 100.0]


def relative_utility(
    utilities: Sequence[UtilityPair],
    homes: Sequence[HomeSpec],
    env: Environment,
    settings: Optional[SolverSettings] = None,
) -> Dict[str, Tuple[float, float]]:
    """Per-class (vital, comfort) divided by the class's maximal feasible utility."""
    if len(utilities) != len(homes):
        raise PreconditionError("one utility per home is required")
    achieved: Dict[str, List[UtilityPair]] = defaultdict(list)
    baseline: Dict[str, List[UtilityPair]] = defaultdict(list)
    for utility, home in zip(utilities, homes):
        achieved[home.label].append(utility)
        baseline[home.label].append(max_utility_baseline(home, env, settings))
    relative = {}
    for label, pairs in achieved.items():
        total = utility_sum(pairs)
        best = utility_sum(baseline[label])
        if best.vital <= 0 or best.comfort <= 0:
            raise PreconditionError(f"class '{label}' has a zero utility baseline")
        rel_vital, rel_comfort = total.vital / best.vital, total.comfort / best.comfort
        if rel_vital > 1 + RELATIVE_EPS or rel_comfort > 1 + RELATIVE_EPS:
            logger.warning(f"class '{label}' exceeds its baseline: {rel_vital:.9f}, {rel_comfort:.9f}")
        relative[label] = (rel_vital, rel_comfort)
    return relative


@dataclass(frozen=True)
class SweepSettings:
    k_max: int = config.SG_KMAX
    a1: float = config.SG_A1
    a2: float = config.SG_A2
    temp_grid: float = config.TEMP_GRID
    scalarization: float = config.SCALARIZATION_WEIGHT
    gm_grid: float = 50.0
    max_workers: int = config.MAX_WORKERS
    timings: bool = False

    def sg_config(self, scheme: str) -> SgConfig:
        factory = SgConfig.sg1 if scheme == "SG1" else SgConfig.sg2
        return factory(
            k_max=self.k_max,
            a1=self.a1,
            a2=self.a2,
            temp_grid=self.temp_grid,
            scalarization=self.scalarization,
            max_workers=self.max_workers,
        )

    @property
    def solver_settings(self) -> SolverSettings:
        return SolverSettings(temp_grid=self.temp_grid, scalarization=self.scalarization)


def _run_scheme(
    scenario: Scenario,
    scheme: str,
    settings: SweepSettings,
    reference_plans: Sequence[CapacityPlan] = (),
) -> Tuple[List[UtilityPair], int, Optional[SgTrace], CapacityPlan]:
    env = scenario.environment
    if scheme == "LM":
        plan = lm_allocate(scenario)
        with ThreadPoolExecutor(max_workers=settings.max_workers) as executor:
            solutions = list(
                executor.map(
                    lambda home, caps: solve_home(home, caps, env, settings.solver_settings),
                    scenario.homes,
                    list(plan.limits),
                )
            )
        return [s.utility for s in solutions], 0, None, plan
    if scheme == "GM":
        result = gm_solve_tiny(scenario, settings.gm_grid, reference_plans, settings.solver_settings)
        return list(result.per_home), 0, None, result.plan
    if scheme in ("SG1", "SG2"):
        plan, solutions, trace = sg_run(scenario, settings.sg_config(scheme))
        return [s.utility for s in solutions], trace.iterations_to_best, trace, plan
    raise PreconditionError(f"unknown scheme '{scheme}'")


def run_sweep(
    scenario: Scenario,
    schemes: Iterable[str],
    capacities: Iterable[float],
    settings: Optional[SweepSettings] = None,
    out: Optional[Union[str, Path]] = None,
) -> SweepResult:
    """Run every scheme at every total capacity; optionally write the CSV to `out`.

    GM runs last at each capacity and searches the other schemes' plans too.
    """
    settings = settings or SweepSettings()
    schemes = [s.upper() for s in schemes]
    unknown = [s for s in schemes if s not in SCHEMES]
    if unknown:
        raise PreconditionError(f"unknown schemes {unknown}; choose from {list(SCHEMES)}")
    result = SweepResult()
    env = scenario.environment
    for capacity in capacities:
        point = scenario.with_capacity(float(capacity))
        plans: List[CapacityPlan] = []
        for scheme in sorted(schemes, key=lambda s: s == "GM"):
            started = time.perf_counter()
            utilities, iters, trace, plan = _run_scheme(point, scheme, settings, plans)
            plans.append(plan)
            elapsed = time.perf_counter() - started if settings.timings else 0.0
            relative = relative_utility(utilities, point.homes, env, settings.solver_settings)
            for label, (rel_vital, rel_comfort) in relative.items():
                result.rows.append(
                    SweepRow(
                        capacity=_sig(capacity),
                        scheme=scheme,
                        label=label,
                        rel_vital=_sig(rel_vital),
                        rel_comfort=_sig(rel_comfort),
                        iters_to_best=iters,
                        wall_s=_sig(elapsed),
                    )
                )
            result.totals[(scheme, float(capacity))] = utility_sum(utilities)
            if trace is not None:
                result.traces[(scheme, float(capacity))] = trace
            logger.info(
                f"{scheme} at C={capacity:.6g} W: "
                + ", ".join(f"{label} {v:.4f}/{c:.4f}" for label, (v, c) in relative.items())
            )
    result = result.sorted(scenario.labels)
    if out is not None:
        result.write_csv(out)
    return result


def dominance_summary(result: SweepResult) -> Dict[str, Dict[str, float]]:
    """Share of sweep points where each SG variant is at least as good as LM, and mean iterations."""
    summary = {}
    for scheme in ("SG1", "SG2"):
        points = [cap for (s, cap) in result.totals if s == scheme and ("LM", cap) in result.totals]
        if not points:
            continue
        wins = [not (result.totals[(scheme, cap)] < result.totals[("LM", cap)]) for cap in points]
        strict = [result.totals[(scheme, cap)] > result.totals[("LM", cap)] for cap in points]
        iters = [result.traces[(scheme, cap)].iterations_to_best for cap in points if (scheme, cap) in result.traces]
        summary[scheme] = {
            "points": len(points),
            "at_least_lm": sum(wins) / len(points),
            "strictly_better": sum(strict) / len(points),
            "mean_iters_to_best": float(np.mean(iters)) if iters else 0.0,
        }
    return summary


def export_trace(trace: SgTrace, path: Union[str, Path]) -> Path:
    path = Path(path)
    frame = pd.DataFrame(
        [
            {
                "k": it.k,
                "step": it.step if it.step is not None else np.nan,
                "total_vital": it.total.vital,
                "total_comfort": it.total.comfort,
                "best": int(it.improved),
                "best_k": it.best_k,
            }
            for it in trace.iterations
        ],
        columns=TRACE_COLUMNS,
    )
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format="%.10g", na_rep="")
    except OSError as e:
        raise OSError(f"cannot write trace to {path}: {e}") from e
    return path


# Oracle validation on shrunken homes


@dataclass(frozen=True)
class OracleCheck:
    label: str
    cap: float
    solver: UtilityPair
    brute_force: UtilityPair
    bound: float
    feasible: bool

    @property
    def ok(self) -> bool:
        return self.feasible and self.solver.vital >= self.brute_force.vital - self.bound - RELATIVE_EPS


def shrink_home(home: HomeSpec, horizon: int, max_duration: int = 2) -> HomeSpec:
    """The same home on a short horizon, washing cut to at most `max_duration` slots."""
    appliances = []
    for spec in home.appliances:
        if spec.kind is ApplianceClass.WASHING:
            spec = replace(spec, duration=min(spec.duration, max_duration), earliest_start=1, deadline=horizon)
        appliances.append(spec)
    return replace(home, appliances=tuple(appliances))


def discretization_bound(home: HomeSpec, env: Environment, settings: SolverSettings) -> float:
    """Vital utility the temperature grid may cost the solver against exhaustive search.

    One grid step of temperature error per slot, priced at the heating vital
    slope u_max / (t_min - floor).
    """
    if home.heating is None:
        return 0.0
    return env.horizon * env.u_max * settings.temp_grid / (home.t_min - env.heat_vital_floor)


def oracle_check(
    scenario: Scenario,
    horizon: int = 4,
    power_grid: float = 250.0,
    per_home_caps: Optional[Sequence[float]] = None,
    settings: Optional[SolverSettings] = None,
) -> List[OracleCheck]:
    """Compare the home solver with brute force on every class shrunk to `horizon` slots."""
    settings = settings or SolverSettings()
    horizon = min(horizon, scenario.horizon)
    env = replace(scenario.environment, exterior_temp=scenario.exterior_temp[:horizon])
    checks = []
    seen = set()
    for home in scenario.homes:
        if home.label in seen:
            continue
        seen.add(home.label)
        small = shrink_home(home, horizon)
        caps_list = per_home_caps or [0.0, 50.0, 700.0, 1050.0, small.subscribed_power]
        for cap in caps_list:
            caps = [cap] * horizon
            solved = solve_home(small, caps, env, settings)
            exhaustive = brute_force_home(small, caps, env, power_grid)
            feasible = bool(np.all(solved.schedule.totals() <= np.asarray(caps)))
            check = OracleCheck(
                label=home.label,
                cap=cap,
                solver=solved.utility,
                brute_force=exhaustive.utility,
                bound=discretization_bound(small, env, settings),
                feasible=feasible,
            )
            log = logger.info if check.ok else logger.warning
            log(
                f"oracle {home.label} cap={cap:g}: solver {solved.utility.as_tuple()} "
                f"brute force {exhaustive.utility.as_tuple()} ok={check.ok}"
            )
            checks.append(check)
    return checks
