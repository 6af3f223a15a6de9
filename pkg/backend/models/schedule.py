"""Capacity plans proposed by the aggregator and schedules chosen by homes."""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from backend.models.scenario import APPLIANCE_ORDER, ApplianceClass
from backend.models.utility import UtilityPair

FEASIBILITY_TOL = 1e-6  # watts


def _frozen(values, dtype=float) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class CapacityPlan:
    """Per-home, per-slot power limits C_ht, shape (H, t_M)."""

    limits: np.ndarray

    def __post_init__(self):
        limits = _frozen(self.limits)
        if limits.ndim != 2:
            raise ValueError("a capacity plan is indexed by (home, slot)")
        if np.any(limits < 0) or not np.all(np.isfinite(limits)):
            raise ValueError("capacity limits must be finite and non-negative")
        object.__setattr__(self, "limits", limits)

    @property
    def homes(self) -> int:
        return self.limits.shape[0]

    @property
    def horizon(self) -> int:
        return self.limits.shape[1]

    def totals(self) -> np.ndarray:
        return self.limits.sum(axis=0)

    def is_feasible(self, capacity: Sequence[float], tol: float = FEASIBILITY_TOL) -> bool:
        return bool(np.all(self.totals() <= np.asarray(capacity, dtype=float) + tol))

    def __eq__(self, other) -> bool:
        return isinstance(other, CapacityPlan) and np.array_equal(self.limits, other.limits)

    def __hash__(self):
        return hash(self.limits.tobytes())


@dataclass(frozen=True, eq=False)
class HomeSchedule:
    """Appliance powers X_ht^a and activity x_ht^a, rows in APPLIANCE_ORDER."""

    power: np.ndarray
    active: np.ndarray
    temperature: np.ndarray
    wash_start: Optional[int]
    utility: UtilityPair

    def __post_init__(self):
        object.__setattr__(self, "power", _frozen(self.power))
        object.__setattr__(self, "active", _frozen(self.active, dtype=bool))
        object.__setattr__(self, "temperature", _frozen(self.temperature))

    @property
    def horizon(self) -> int:
        return self.power.shape[1]

    def row(self, kind: ApplianceClass) -> np.ndarray:
        return self.power[APPLIANCE_ORDER.index(kind)]

    def totals(self) -> np.ndarray:
        return self.power.sum(axis=0)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, HomeSchedule)
            and np.array_equal(self.power, other.power)
            and np.array_equal(self.active, other.active)
            and self.wash_start == other.wash_start
            and self.utility == other.utility
        )


def schedule_from_powers(
    light: Sequence[float],
    heat: Sequence[float],
    wash: Sequence[float],
    wash_start: Optional[int] = None,
    temperature: Optional[Sequence[float]] = None,
    utility: UtilityPair = UtilityPair(),
) -> HomeSchedule:
    """Build an unevaluated schedule; activity follows from non-zero power."""
    power = np.vstack([np.asarray(light, float), np.asarray(heat, float), np.asarray(wash, float)])
    temps = np.zeros(power.shape[1]) if temperature is None else temperature
    return HomeSchedule(power, power > 0, temps, wash_start, utility)


@dataclass(frozen=True, eq=False)
class HomeSolution:
    """A home's answer to one capacity vector.

    Only `utility` and `greedients` leave the home during a Sub-Greedient
    run; the rest stays with the home controller.
    """

    schedule: HomeSchedule
    utility: UtilityPair
    residual: np.ndarray  # unused capacity per slot
    greedients: np.ndarray  # g_ht, one value per slot
    by_appliance: Dict[ApplianceClass, np.ndarray]  # g_ht^a
    increments: np.ndarray  # the ΔC_t achieving g_ht (0 where g_ht = 0)

    def __post_init__(self):
        for name in ("residual", "greedients", "increments"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
