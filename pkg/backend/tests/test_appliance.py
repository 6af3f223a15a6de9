import numpy as np
import pytest
from backend.exceptions import PreconditionError, ScheduleViolation
from backend.models.schedule import schedule_from_powers
from backend.models.utility import UtilityPair
from backend.services.appliance import (
    evaluate_home,
    heat_step,
    heat_utility,
    light_utility,
    temperature_trajectory,
    wash_utility,
)


def test_heat_step_recurrence():
    """T_t = T_{t-1} + F·X + G·(Te − T_{t-1})."""
    assert heat_step(22.0, 0.0, 10.0, 0.0017, 0.075) == pytest.approx(21.1)
    assert heat_step(22.0, 1000.0, 10.0, 0.0017, 0.075) == pytest.approx(22.8)
    # steady state with 1000 W
    assert heat_step(10 + 1.7 / 0.075, 1000.0, 10.0, 0.0017, 0.075) == pytest.approx(10 + 1.7 / 0.075)


def test_light_utility_shape(class1_home):
    """Vital as soon as p_min is reached, comfort linear up to p_max."""
    light = class1_home.lighting
    assert light_utility(0.0, light, 1.0) == UtilityPair(0.0, 0.0)
    assert light_utility(50.0, light, 1.0) == UtilityPair(1.0, 0.0)
    assert light_utility(525.0, light, 1.0) == UtilityPair(1.0, 0.5)
    assert light_utility(1000.0, light, 1.0) == UtilityPair(1.0, 1.0)
    with pytest.raises(PreconditionError):
        light_utility(20.0, light, 1.0)


def test_heat_utility_shape(class1_home):
    """Vital grows to t_min, comfort from t_min to t_pref."""
    assert heat_utility(7.5, class1_home, 1.0) == UtilityPair(0.5, 0.0)
    assert heat_utility(15.0, class1_home, 1.0) == UtilityPair(1.0, 0.0)
    assert heat_utility(18.5, class1_home, 1.0).comfort == pytest.approx(0.5)
    assert heat_utility(30.0, class1_home, 1.0) == UtilityPair(1.0, 1.0)
    assert heat_utility(-3.0, class1_home, 1.0) == UtilityPair(0.0, 0.0)


def test_wash_utility_sooner_is_better(class1_home):
    """Full vital once scheduled; comfort falls linearly to the latest start."""
    washing = class1_home.washing
    assert wash_utility(1, washing, 100, 1.0) == UtilityPair(100.0, 100.0)
    assert wash_utility(93, washing, 100, 1.0) == UtilityPair(100.0, 0.0)
    assert wash_utility(47, washing, 100, 1.0) == UtilityPair(100.0, 50.0)
    assert wash_utility(None, washing, 100, 1.0) == UtilityPair(0.0, 0.0)
    with pytest.raises(PreconditionError):
        wash_utility(94, washing, 100, 1.0)


def test_evaluate_all_off_decay_credit(class1_home, env100):
    """With nothing on the home still earns vital and comfort while it cools from 22 °C."""
    zeros = np.zeros(100)
    utility, temps = evaluate_home(schedule_from_powers(zeros, zeros, zeros), class1_home, env100)

    assert temps[0] == pytest.approx(21.1)
    assert np.all(temps[:11] >= 15.0) and temps[11] < 15.0
    assert utility.vital == pytest.approx(74.51, abs=0.01)
    assert utility.comfort == pytest.approx(4.32, abs=0.01)


def test_evaluate_full_schedule(class1_home, env100):
    """Light at p_max, steady heating and an early wash saturate every utility."""
    light = np.full(100, 1000.0)
    heat = np.full(100, 1000.0)
    wash = np.zeros(100)
    wash[:8] = 600.0
    utility, temps = evaluate_home(schedule_from_powers(light, heat, wash, wash_start=1), class1_home, env100)
    assert np.all(temps >= 22.0)
    assert utility == UtilityPair(300.0, 300.0)


def test_temperature_trajectory_matches_steps(class1_home):
    """The trajectory applies the recurrence slot after slot."""
    temps = temperature_trajectory(class1_home, [1000.0, 0.0], [10.0, 10.0])
    assert temps[0] == pytest.approx(22.8)
    assert temps[1] == pytest.approx(22.8 + 0.075 * (10.0 - 22.8))


@pytest.mark.parametrize(
    "light,heat,wash,start,appliance,slot",
    [
        ([20, 0, 0], [0, 0, 0], [0, 0, 0], None, "lighting", 1),
        ([0, 0, 0], [0, 500, 0], [0, 0, 0], None, "heating", 2),
        ([0, 0, 0], [0, 0, 0], [600, 0, 600], 1, "washing", 1),
        ([0, 0, 0], [0, 0, 0], [600, 600, 0], None, "washing", None),
    ],
)
def test_evaluate_rejects_violations(make_scenario, class1_block, light, heat, wash, start, appliance, slot):
    """Out-of-bound powers and broken wash runs name the appliance and slot."""
    scenario = make_scenario([class1_block], horizon=3, wash_duration=2)
    home, env = scenario.homes[0], scenario.environment
    with pytest.raises(ScheduleViolation) as excinfo:
        evaluate_home(schedule_from_powers(light, heat, wash, wash_start=start), home, env)
    assert excinfo.value.appliance == appliance
    assert excinfo.value.slot == slot
