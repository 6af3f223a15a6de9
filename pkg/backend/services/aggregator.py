"""Capacity allocation across homes: GM, LM and the Sub-Greedient loop.

GM is the joint optimum over grid and breakpoint schedules and only
exists for tiny instances (see `backend.services.oracle`). LM splits
capacity in proportion to subscribed power. Sub-Greedient starts from a
round-robin plan and moves capacity toward the homes advertising the best
greedients, keeping every iterate feasible through the projection in
`project_allocation`.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from backend import config
from backend.exceptions import PreconditionError
from backend.models.scenario import Scenario
from backend.models.schedule import CapacityPlan, HomeSolution
from backend.models.utility import UtilityPair, utility_sum
from backend.services.home_controller import HomeController, HomeReport
from backend.services.home_solver import SolverSettings
from backend.services.oracle import GmResult, gm_search

logger = logging.getLogger(__name__)

DIGITS = 9

__all__ = [
    "StepRule",
    "SgConfig",
    "SgIteration",
    "SgTrace",
    "lm_allocate",
    "round_robin_init",
    "step_size",
    "slot_scale",
    "cap_updates",
    "project_allocation",
    "sg_run",
    "gm_solve_tiny",
    "GmResult",
    "async_reallocate",
]


class StepRule(str, Enum):
    DIMINISHING = "diminishing"  # a1 / sqrt(k)
    CONSTANT_LENGTH = "constant_length"  # a2 / ||g||


@dataclass(frozen=True)
class SgConfig:
    k_max: int = config.SG_KMAX
    step_rule: StepRule = StepRule.DIMINISHING
    a1: float = config.SG_A1
    a2: float = config.SG_A2
    scalarization: float = config.SCALARIZATION_WEIGHT
    temp_grid: float = config.TEMP_GRID
    max_workers: int = config.MAX_WORKERS
    lm_candidate: bool = True  # the LM plan competes for best

    def __post_init__(self):
        if self.k_max < 1:
            raise PreconditionError("k_max must be at least 1")
        if self.coefficient <= 0:
            raise PreconditionError(f"step coefficient for {self.step_rule.value} must be positive")

    @classmethod
    def sg1(cls, **overrides) -> "SgConfig":
        return cls(step_rule=StepRule.DIMINISHING, **overrides)

    @classmethod
    def sg2(cls, **overrides) -> "SgConfig":
        return cls(step_rule=StepRule.CONSTANT_LENGTH, **overrides)

    @property
    def coefficient(self) -> float:
        return self.a1 if self.step_rule is StepRule.DIMINISHING else self.a2

    @property
    def solver_settings(self) -> SolverSettings:
        return SolverSettings(temp_grid=self.temp_grid, scalarization=self.scalarization)


@dataclass(frozen=True, eq=False)
class SgIteration:
    k: int
    plan: CapacityPlan
    utilities: Tuple[UtilityPair, ...]
    total: UtilityPair
    improved: bool
    best_k: int
    step: Optional[float] = None  # α_k used to build the next plan; None on the last iterate
    updates: Optional[np.ndarray] = None  # β_kht


def _beats(a: UtilityPair, b: Optional[UtilityPair]) -> bool:
    """Strict lexicographic gain, ignoring float noise below DIGITS decimals."""
    if b is None:
        return True
    return (round(a.vital, DIGITS), round(a.comfort, DIGITS)) > (round(b.vital, DIGITS), round(b.comfort, DIGITS))


@dataclass
class SgTrace:
    iterations: List[SgIteration] = field(default_factory=list)
    baseline: Optional[SgIteration] = None  # the LM plan, recorded as k = 0

    def append(self, iteration: SgIteration) -> None:
        self.iterations.append(iteration)

    @property
    def best(self) -> SgIteration:
        if self.best_k == 0:
            return self.baseline
        return self.iterations[self.best_k - 1]

    @property
    def best_k(self) -> int:
        """Iteration of the best plan; 0 when the LM plan is above every iterate."""
        k = self.iterations[-1].best_k if self.iterations else 0
        if self.baseline is None or k == 0:
            return k
        top = self.iterations[k - 1].total
        if not _beats(top, self.baseline.total) and self.baseline.total > top:
            return 0
        return k

    @property
    def iterations_to_best(self) -> int:
        return self.best_k

    def __len__(self):
        return len(self.iterations)


def subscription_budget(scenario: Scenario) -> np.ndarray:
    """B(t) = min(C(t), Σ_h L(h)): capacity beyond the subscriptions cannot be placed."""
    return np.minimum(np.asarray(scenario.capacity, dtype=float), sum(scenario.subscribed))


def lm_allocate(scenario: Scenario) -> CapacityPlan:
    subscribed = np.asarray(scenario.subscribed, dtype=float)
    total = subscribed.sum()
    if total <= 0:
        raise PreconditionError("LM needs a positive total subscription")
    shares = subscribed / total
    return CapacityPlan(np.outer(shares, np.asarray(scenario.capacity, dtype=float)))


def round_robin_init(scenario: Scenario) -> CapacityPlan:
    """Fill homes up to their subscription in cyclic order, rotating the start with time."""
    subscribed = scenario.subscribed
    count = len(subscribed)
    limits = np.zeros((count, scenario.horizon))
    offset = 0
    for t, capacity in enumerate(scenario.capacity):
        remaining = capacity
        served = 0
        for i in range(count):
            if remaining <= 0:
                break
            home = (offset + i) % count
            grant = min(subscribed[home], remaining)
            limits[home, t] = grant
            remaining -= grant
            served += 1
        offset = (offset + served) % count
    return CapacityPlan(limits)


def step_size(rule: StepRule, k: int, greedients: np.ndarray, coefficient: float) -> Optional[float]:
    """α_k, or None when the constant-length rule meets all-zero greedients."""
    if k < 1:
        raise PreconditionError("iterations are counted from 1")
    if rule is StepRule.DIMINISHING:
        return coefficient / math.sqrt(k)
    norm = float(np.linalg.norm(np.asarray(greedients, dtype=float).ravel()))
    if norm == 0:
        return None
    return coefficient / norm


def _capped(alpha: float, greedients: np.ndarray, l_min: float, budget: np.ndarray, scale=1.0) -> np.ndarray:
    return np.minimum(np.minimum(alpha * greedients * scale, l_min), budget[None, :])


def slot_scale(rule: StepRule, budget: np.ndarray, l_min: float) -> np.ndarray:
    """Per-slot multiplier on α_k g_ht.

    Constant-length steps are multiplied by B(t) / L_m, floored at 1.
    Diminishing steps are not scaled.
    """
    budget = np.asarray(budget, dtype=float)
    if rule is not StepRule.CONSTANT_LENGTH or l_min <= 0:
        return np.ones_like(budget)
    return np.maximum(budget / l_min, 1.0)


def cap_updates(alpha: float, greedients: np.ndarray, scenario: Scenario) -> np.ndarray:
    """β_kht = min(α_k g_ht, L_m, C(t)) with the capacity term taken as B(t)."""
    if alpha < 0:
        raise PreconditionError("step size must be non-negative")
    return _capped(alpha, np.asarray(greedients, dtype=float), min(scenario.subscribed), subscription_budget(scenario))


def _lambda(beta: np.ndarray, protected: np.ndarray) -> float:
    """Common reduction λ making the projected updates sum to zero.

    The sum is piecewise linear in λ with breakpoints at the protected β, so
    scanning the segments from the top gives λ exactly.
    """
    free = ~protected
    n_free = int(free.sum())
    s_free = float(beta[free].sum())
    tops = np.sort(beta[protected])[::-1]
    acc = 0.0
    lam = 0.0
    for k in range(len(tops) + 1):
        if k > 0:
            acc += tops[k - 1]
        if n_free + k == 0:
            # every home protected: any λ above all β keeps the sum
            return float(tops[0]) if len(tops) else 0.0
        lam = (s_free + acc) / (n_free + k)
        upper = tops[k - 1] if k > 0 else np.inf
        lower = tops[k] if k < len(tops) else -np.inf
        slack = 1e-9 * max(1.0, abs(lam))
        if lower - slack <= lam <= upper + slack:
            return float(lam)
    return float(lam)


def project_allocation(current: Sequence[float], beta: Sequence[float], c_t: float) -> np.ndarray:
    """Move `current` by `beta` minus a common λ, keeping the sum at `c_t` and values ≥ 0.

    Homes that would go negative join the protected set, where the update is
    max(β − λ, 0) instead of β − λ, and λ is solved again.
    """
    current = np.asarray(current, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if np.any(beta < 0):
        raise PreconditionError("updates must be non-negative")
    protected = np.zeros(len(current), dtype=bool)
    while True:
        lam = _lambda(beta, protected)
        out = np.where(protected, current + np.maximum(beta - lam, 0.0), current + beta - lam)
        negative = (out < 0) & ~protected
        if not negative.any():
            break
        protected |= negative
    out = np.maximum(out, 0.0)
    residue = c_t - math.fsum(out)
    if residue != 0 and len(out):
        pool = np.where(~protected, out, -np.inf) if (~protected).any() else out
        out[int(np.argmax(pool))] += residue
    return out


def _adjust(limits: np.ndarray, greedients: np.ndarray, alpha: float, l_min: float, budget: np.ndarray, rule: StepRule):
    beta = _capped(alpha, greedients, l_min, budget, slot_scale(rule, budget, l_min)[None, :])
    adjusted = np.empty_like(limits)
    for t in range(limits.shape[1]):
        adjusted[:, t] = project_allocation(limits[:, t], beta[:, t], budget[t])
    return beta, adjusted


def _respond(executor: ThreadPoolExecutor, controllers: Sequence[HomeController], limits: np.ndarray) -> List[HomeReport]:
    return list(executor.map(HomeController.respond, controllers, list(limits)))


def sg_run(scenario: Scenario, sg_config: Optional[SgConfig] = None) -> Tuple[CapacityPlan, List[HomeSolution], SgTrace]:
    """Sub-Greedient loop; returns the best plan found, the homes' solutions under it and the trace.

    With `lm_candidate` the LM plan is scored first as k = 0 and replaces the
    best iterate when that iterate does not beat it.
    """
    sg_config = sg_config or SgConfig()
    env = scenario.environment
    controllers = [HomeController(home, env, sg_config.solver_settings) for home in scenario.homes]
    budget = subscription_budget(scenario)
    l_min = min(c.subscribed_power for c in controllers)
    plan = round_robin_init(scenario)
    trace = SgTrace()
    best_total: Optional[UtilityPair] = None
    best_k = 0

    with ThreadPoolExecutor(max_workers=sg_config.max_workers) as executor:
        if sg_config.lm_candidate and sum(scenario.subscribed) > 0:
            lm_plan = lm_allocate(scenario)
            reports = _respond(executor, controllers, lm_plan.limits)
            trace.baseline = SgIteration(
                k=0,
                plan=lm_plan,
                utilities=tuple(r.utility for r in reports),
                total=utility_sum(r.utility for r in reports),
                improved=False,
                best_k=0,
            )
        for k in range(1, sg_config.k_max + 1):
            reports = _respond(executor, controllers, plan.limits)
            total = utility_sum(r.utility for r in reports)
            improved = _beats(total, best_total)
            if improved:
                best_total, best_k = total, k
            greedients = np.array([r.greedients for r in reports])
            iteration = SgIteration(
                k=k,
                plan=plan,
                utilities=tuple(r.utility for r in reports),
                total=total,
                improved=improved,
                best_k=best_k,
            )
            alpha = None
            if greedients.any() and k < sg_config.k_max:
                alpha = step_size(sg_config.step_rule, k, greedients, sg_config.coefficient)
            if alpha is None:
                trace.append(iteration)
                break
            beta, adjusted = _adjust(plan.limits, greedients, alpha, l_min, budget, sg_config.step_rule)
            trace.append(replace(iteration, step=alpha, updates=beta))
            logger.debug(f"SG k={k}: total {total.as_tuple()}, step {alpha:.6g}")
            plan = CapacityPlan(adjusted)

    best = trace.best
    solutions = [c.solve(caps) for c, caps in zip(controllers, best.plan.limits)]
    logger.info(
        f"SG ({sg_config.step_rule.value}) finished after {len(trace)} iterations, "
        f"best at k={trace.best_k}: {best.total.as_tuple()}"
    )
    return best.plan, solutions, trace


def gm_solve_tiny(
    scenario: Scenario,
    power_grid: float,
    reference_plans: Sequence[CapacityPlan] = (),
    settings: Optional[SolverSettings] = None,
) -> GmResult:
    """Joint optimum over grid and breakpoint schedules, for tiny instances.

    Every home's solver response to the LM plan, the round-robin plan and
    each of `reference_plans` is among the schedules searched, so GM never
    ends below those plans.
    """
    plans = [round_robin_init(scenario), *reference_plans]
    if sum(scenario.subscribed) > 0:
        plans.insert(0, lm_allocate(scenario))
    return gm_search(scenario, power_grid, plans, settings)


def async_reallocate(
    scenario: Scenario,
    subset: Sequence[int],
    plan: CapacityPlan,
    sg_config: Optional[SgConfig] = None,
    k: int = 1,
) -> CapacityPlan:
    """One Sub-Greedient adjustment among the homes in `subset` only.

    The subset keeps its current per-slot total; other homes are untouched.
    """
    sg_config = sg_config or SgConfig()
    ids = [home.id for home in scenario.homes]
    members = sorted(set(subset))
    if len(members) < 2:
        raise PreconditionError("asynchronous reallocation needs at least two homes")
    missing = [h for h in members if h not in ids]
    if missing:
        raise PreconditionError(f"unknown home ids {missing}")
    rows = [ids.index(h) for h in members]
    env = scenario.environment
    controllers = [HomeController(scenario.homes[r], env, sg_config.solver_settings) for r in rows]
    limits = plan.limits[rows]
    with ThreadPoolExecutor(max_workers=sg_config.max_workers) as executor:
        reports = _respond(executor, controllers, limits)
    greedients = np.array([r.greedients for r in reports])
    if not greedients.any():
        return plan
    alpha = step_size(sg_config.step_rule, k, greedients, sg_config.coefficient)
    budget = limits.sum(axis=0)
    l_min = min(c.subscribed_power for c in controllers)
    _, adjusted = _adjust(limits, greedients, alpha, l_min, budget, sg_config.step_rule)
    updated = plan.limits.copy()
    updated[rows] = adjusted
    logger.info(f"Reallocated among homes {members}")
    return CapacityPlan(updated)
