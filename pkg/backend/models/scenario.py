"""Scenario types and the JSON scenario document codec.

Slots are 1-indexed in documents and in the public fields that name a slot
(`earliest_start`, `deadline`, `wash_start`); per-slot sequences are plain
0-indexed tuples of length `horizon`.
"""

import json
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from backend import config
from backend.exceptions import (
    ScenarioSemanticError,
    ScenarioSyntaxError,
    UnknownApplianceClassError,
)

logger = logging.getLogger(__name__)


class ApplianceClass(str, Enum):
    LIGHTING = "lighting"
    HEATING = "heating"
    WASHING = "washing"


APPLIANCE_ORDER = (ApplianceClass.LIGHTING, ApplianceClass.HEATING, ApplianceClass.WASHING)


@dataclass(frozen=True)
class ApplianceSpec:
    kind: ApplianceClass
    p_min: float
    p_max: float
    f_coeff: Optional[float] = None  # heating: °C per watt per slot
    g_coeff: Optional[float] = None  # heating: share of the indoor/outdoor gap closed per slot
    duration: Optional[int] = None  # washing: slots
    earliest_start: Optional[int] = None  # washing: first allowed start slot
    deadline: Optional[int] = None  # washing: last slot the run may occupy

    def __post_init__(self):
        if not (0 < self.p_min <= self.p_max):
            raise ScenarioSemanticError(
                f"{self.kind.value}: need 0 < p_min <= p_max, got {self.p_min}/{self.p_max}"
            )
        if self.kind is ApplianceClass.HEATING:
            if self.f_coeff is None or self.f_coeff <= 0:
                raise ScenarioSemanticError("heating: f_coeff must be positive")
            if self.g_coeff is None or not (0 < self.g_coeff <= 1):
                raise ScenarioSemanticError("heating: g_coeff must lie in (0, 1]")
        if self.kind is ApplianceClass.WASHING:
            if self.p_min != self.p_max:
                raise ScenarioSemanticError("washing: p_min must equal p_max")
            if self.duration is None or self.duration < 1:
                raise ScenarioSemanticError("washing: duration must be at least one slot")
            if self.earliest_start is None or self.earliest_start < 1 or self.deadline is None:
                raise ScenarioSemanticError("washing: earliest_start and deadline are required")
            if self.earliest_start + self.duration - 1 > self.deadline:
                raise ScenarioSemanticError(
                    f"washing: window [{self.earliest_start}, {self.deadline}] "
                    f"cannot hold a run of {self.duration} slots"
                )

    @property
    def latest_start(self) -> int:
        return self.deadline - self.duration + 1


@dataclass(frozen=True)
class HomeSpec:
    id: int
    appliances: Tuple[ApplianceSpec, ...]
    subscribed_power: float
    t_min: float
    t_pref: float
    t_init: float
    t_max: float  # carried, not enforced by any utility shape
    label: str = ""

    def __post_init__(self):
        kinds = [a.kind for a in self.appliances]
        if len(set(kinds)) != len(kinds):
            raise ScenarioSemanticError(f"home {self.id}: one appliance per class")
        if not (self.t_min < self.t_pref <= self.t_max):
            raise ScenarioSemanticError(
                f"home {self.id}: need t_min < t_pref <= t_max, "
                f"got {self.t_min}/{self.t_pref}/{self.t_max}"
            )
        if not math.isclose(self.subscribed_power, sum(a.p_max for a in self.appliances)):
            raise ScenarioSemanticError(
                f"home {self.id}: subscribed power {self.subscribed_power} "
                f"must equal the sum of appliance maxima"
            )

    def appliance(self, kind: ApplianceClass) -> Optional[ApplianceSpec]:
        for spec in self.appliances:
            if spec.kind is kind:
                return spec
        return None

    @property
    def lighting(self) -> Optional[ApplianceSpec]:
        return self.appliance(ApplianceClass.LIGHTING)

    @property
    def heating(self) -> Optional[ApplianceSpec]:
        return self.appliance(ApplianceClass.HEATING)

    @property
    def washing(self) -> Optional[ApplianceSpec]:
        return self.appliance(ApplianceClass.WASHING)

    @property
    def profile(self) -> "HomeSpec":
        """The same home without identity, used as a cache key."""
        return replace(self, id=0, label="")


@dataclass(frozen=True)
class Environment:
    """What a home controller needs to know besides its own appliances."""

    exterior_temp: Tuple[float, ...]
    u_max: float = 1.0
    heat_vital_floor: float = config.HEAT_VITAL_FLOOR

    @property
    def horizon(self) -> int:
        return len(self.exterior_temp)


@dataclass(frozen=True)
class Scenario:
    homes: Tuple[HomeSpec, ...]
    horizon: int
    exterior_temp: Tuple[float, ...]
    capacity: Tuple[float, ...]
    slot_minutes: float = 5.0
    max_utility_per_slot: float = 1.0
    heat_vital_floor: float = config.HEAT_VITAL_FLOOR
    name: str = "scenario"

    def __post_init__(self):
        if self.horizon < 1:
            raise ScenarioSemanticError("horizon must be at least one slot")
        if len(self.exterior_temp) != self.horizon or len(self.capacity) != self.horizon:
            raise ScenarioSemanticError("per-slot series must have horizon entries")
        if any(not math.isfinite(c) or c < 0 for c in self.capacity):
            raise ScenarioSemanticError("capacity must be finite and non-negative in every slot")
        if self.max_utility_per_slot <= 0:
            raise ScenarioSemanticError("max_utility_per_slot must be positive")
        ids = [h.id for h in self.homes]
        if len(set(ids)) != len(ids):
            raise ScenarioSemanticError("duplicated home id")
        for home in self.homes:
            washing = home.washing
            if washing is not None and washing.deadline > self.horizon:
                raise ScenarioSemanticError(
                    f"home {home.id}: washing window exceeds horizon {self.horizon}"
                )
        if self.heat_vital_floor >= min((h.t_min for h in self.homes), default=math.inf):
            raise ScenarioSemanticError("heat_vital_floor must lie below every t_min")

    @property
    def environment(self) -> Environment:
        return Environment(self.exterior_temp, self.max_utility_per_slot, self.heat_vital_floor)

    @property
    def subscribed(self) -> List[float]:
        return [h.subscribed_power for h in self.homes]

    @property
    def labels(self) -> List[str]:
        """Class labels in first-appearance order."""
        seen: List[str] = []
        for home in self.homes:
            if home.label not in seen:
                seen.append(home.label)
        return seen

    def with_capacity(self, capacity: Union[float, List[float]]) -> "Scenario":
        return replace(self, capacity=_series(capacity, self.horizon, "capacity"))

    def restricted(self, home_ids: List[int]) -> "Scenario":
        wanted = set(home_ids)
        return replace(self, homes=tuple(h for h in self.homes if h.id in wanted))


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _number(value: Any, where: str) -> float:
    if not _is_number(value):
        raise ScenarioSemanticError(f"{where} must be a finite number, got {value!r}")
    return float(value)


def _integer(value: Any, where: str) -> int:
    """Whole numbers only; 3.0 is accepted, 3.5 and "3" are not."""
    if not _is_number(value) or float(value) != int(value):
        raise ScenarioSemanticError(f"{where} must be a whole number, got {value!r}")
    return int(value)


def _series(value: Any, horizon: int, name: str) -> Tuple[float, ...]:
    if _is_number(value):
        return tuple(float(value) for _ in range(horizon))
    if isinstance(value, list) and all(_is_number(v) for v in value):
        if len(value) != horizon:
            raise ScenarioSemanticError(f"{name} has {len(value)} entries, horizon is {horizon}")
        return tuple(float(v) for v in value)
    raise ScenarioSemanticError(f"{name} must be a finite number or a list of finite numbers")


def _require(block: Dict[str, Any], key: str, where: str) -> Any:
    if key not in block:
        raise ScenarioSemanticError(f"{where}: missing '{key}'")
    return block[key]


def _appliance(kind: ApplianceClass, block: Dict[str, Any], where: str) -> ApplianceSpec:
    if not isinstance(block, dict):
        raise ScenarioSemanticError(f"{where}.{kind.value} must be an object")
    where = f"{where}.{kind.value}"
    if kind is ApplianceClass.WASHING:
        if "power" in block:
            p_min = p_max = _number(block["power"], f"{where}.power")
        else:
            p_min = _number(_require(block, "p_min", where), f"{where}.p_min")
            p_max = _number(_require(block, "p_max", where), f"{where}.p_max")
        return ApplianceSpec(
            kind,
            p_min,
            p_max,
            duration=_integer(_require(block, "duration", where), f"{where}.duration"),
            earliest_start=_integer(_require(block, "earliest_start", where), f"{where}.earliest_start"),
            deadline=_integer(_require(block, "deadline", where), f"{where}.deadline"),
        )
    p_min = _number(_require(block, "p_min", where), f"{where}.p_min")
    p_max = _number(_require(block, "p_max", where), f"{where}.p_max")
    if kind is ApplianceClass.HEATING:
        return ApplianceSpec(
            kind,
            p_min,
            p_max,
            f_coeff=_number(_require(block, "f_coeff", where), f"{where}.f_coeff"),
            g_coeff=_number(_require(block, "g_coeff", where), f"{where}.g_coeff"),
        )
    return ApplianceSpec(kind, p_min, p_max)


HOME_KEYS = {"label", "count", "id", "t_min", "t_pref", "t_init", "t_max", "subscribed_power"}


def _homes(blocks: Any) -> Tuple[HomeSpec, ...]:
    if not isinstance(blocks, list) or not blocks:
        raise ScenarioSemanticError("homes must be a non-empty list")
    homes: List[HomeSpec] = []
    next_id = 0
    for index, block in enumerate(blocks):
        where = f"homes[{index}]"
        if not isinstance(block, dict):
            raise ScenarioSemanticError(f"{where} must be an object")
        for key in block:
            if key not in HOME_KEYS and key not in {k.value for k in ApplianceClass}:
                raise UnknownApplianceClassError(f"{where}: unknown appliance class '{key}'")
        appliances = tuple(
            _appliance(kind, block[kind.value], where) for kind in APPLIANCE_ORDER if kind.value in block
        )
        count = _integer(block.get("count", 1), f"{where}.count")
        if count < 1:
            raise ScenarioSemanticError(f"{where}: count must be positive")
        if "id" in block and count != 1:
            raise ScenarioSemanticError(f"{where}: an explicit id requires count 1")
        total = sum(a.p_max for a in appliances)
        subscribed = _number(block.get("subscribed_power", total), f"{where}.subscribed_power")
        label = str(block.get("label", f"class{index + 1}"))
        temps = {
            key: _number(_require(block, key, where), f"{where}.{key}")
            for key in ("t_min", "t_pref", "t_init", "t_max")
        }
        explicit_id = _integer(block["id"], f"{where}.id") if "id" in block else None
        for _ in range(count):
            home_id = explicit_id if explicit_id is not None else next_id
            next_id = max(next_id, home_id) + 1
            homes.append(
                HomeSpec(
                    id=home_id,
                    appliances=appliances,
                    subscribed_power=subscribed,
                    label=label,
                    **temps,
                )
            )
    return tuple(homes)


def scenario_from_dict(document: Dict[str, Any]) -> Scenario:
    if not isinstance(document, dict):
        raise ScenarioSemanticError("scenario document must be an object")
    horizon = _integer(_require(document, "horizon", "scenario"), "horizon")
    if horizon < 1:
        raise ScenarioSemanticError("horizon must be at least one slot")
    scenario = Scenario(
        homes=_homes(_require(document, "homes", "scenario")),
        horizon=horizon,
        exterior_temp=_series(_require(document, "exterior_temp", "scenario"), horizon, "exterior_temp"),
        capacity=_series(_require(document, "capacity", "scenario"), horizon, "capacity"),
        slot_minutes=_number(document.get("slot_minutes", 5.0), "slot_minutes"),
        max_utility_per_slot=_number(document.get("max_utility_per_slot", 1.0), "max_utility_per_slot"),
        heat_vital_floor=_number(document.get("heat_vital_floor", config.HEAT_VITAL_FLOOR), "heat_vital_floor"),
        name=str(document.get("name", "scenario")),
    )
    logger.debug(f"Parsed scenario '{scenario.name}' with {len(scenario.homes)} homes")
    return scenario


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document."""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioSyntaxError(e.msg, e.lineno, e.colno) from e
    return scenario_from_dict(document)


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise OSError(f"cannot read scenario {path}: {e}") from e
    return parse_scenario(text)


def _appliance_block(spec: ApplianceSpec) -> Dict[str, Any]:
    if spec.kind is ApplianceClass.WASHING:
        return {
            "power": spec.p_max,
            "duration": spec.duration,
            "earliest_start": spec.earliest_start,
            "deadline": spec.deadline,
        }
    block: Dict[str, Any] = {"p_min": spec.p_min, "p_max": spec.p_max}
    if spec.kind is ApplianceClass.HEATING:
        block.update(f_coeff=spec.f_coeff, g_coeff=spec.g_coeff)
    return block


def scenario_to_dict(scenario: Scenario) -> Dict[str, Any]:
    homes = []
    for home in scenario.homes:
        block: Dict[str, Any] = {"id": home.id, "label": home.label}
        for spec in home.appliances:
            block[spec.kind.value] = _appliance_block(spec)
        block.update(
            t_min=home.t_min,
            t_pref=home.t_pref,
            t_init=home.t_init,
            t_max=home.t_max,
            subscribed_power=home.subscribed_power,
        )
        homes.append(block)
    return {
        "name": scenario.name,
        "horizon": scenario.horizon,
        "slot_minutes": scenario.slot_minutes,
        "exterior_temp": list(scenario.exterior_temp),
        "capacity": list(scenario.capacity),
        "max_utility_per_slot": scenario.max_utility_per_slot,
        "heat_vital_floor": scenario.heat_vital_floor,
        "homes": homes,
    }


def render_scenario(scenario: Scenario) -> str:
    return json.dumps(scenario_to_dict(scenario), indent=2)
