import numpy as np
import pytest
from backend.exceptions import InstanceTooLargeError, PreconditionError
from backend.models.schedule import CapacityPlan
from backend.services.aggregator import (
    SgConfig,
    StepRule,
    async_reallocate,
    cap_updates,
    gm_solve_tiny,
    lm_allocate,
    project_allocation,
    round_robin_init,
    sg_run,
    step_size,
)


@pytest.fixture
def heat_only_block():
    return {
        "label": "heat-only",
        "heating": {"p_min": 100, "p_max": 100, "f_coeff": 0.05, "g_coeff": 0.2},
        "t_min": 15,
        "t_pref": 22,
        "t_init": 15,
        "t_max": 25,
    }


def test_lm_splits_by_subscription(make_scenario, class1_block, class2_block):
    """Each home gets its subscription's share of every slot."""
    scenario = make_scenario([class1_block, class2_block], horizon=4, capacity=1000.0)
    plan = lm_allocate(scenario)

    assert plan.limits[:, 0] == pytest.approx([658.82, 341.18], abs=0.01)
    assert np.allclose(plan.totals(), 1000.0)


def test_lm_is_scale_equivariant(make_scenario, class1_block, class2_block):
    """Scaling the capacity scales the plan."""
    first = lm_allocate(make_scenario([class1_block, class2_block], horizon=4, capacity=1000.0))
    second = lm_allocate(make_scenario([class1_block, class2_block], horizon=4, capacity=3000.0))
    assert np.allclose(second.limits, 3 * first.limits)


def test_round_robin_rotates_start(make_scenario, heat_only_block):
    """Four 100 W homes sharing 250 W: the next slot starts where the last left off."""
    scenario = make_scenario([dict(heat_only_block, count=4)], horizon=2, capacity=250.0)
    plan = round_robin_init(scenario)

    assert plan.limits[:, 0].tolist() == [100.0, 100.0, 50.0, 0.0]
    assert plan.limits[:, 1].tolist() == [100.0, 50.0, 0.0, 100.0]


def test_round_robin_stops_at_subscriptions(make_scenario, heat_only_block):
    """Capacity beyond the subscriptions stays unassigned."""
    scenario = make_scenario([dict(heat_only_block, count=2)], horizon=2, capacity=1000.0)
    assert np.all(round_robin_init(scenario).limits == 100.0)


def test_step_size_rules():
    g = np.array([[3.0, 4.0]])
    assert step_size(StepRule.DIMINISHING, 4, g, 2.0) == pytest.approx(1.0)
    assert step_size(StepRule.CONSTANT_LENGTH, 7, g, 10.0) == pytest.approx(2.0)
    assert step_size(StepRule.CONSTANT_LENGTH, 1, np.zeros((2, 2)), 10.0) is None
    assert step_size(StepRule.DIMINISHING, 1, np.zeros((2, 2)), 10.0) == pytest.approx(10.0)
    with pytest.raises(PreconditionError):
        step_size(StepRule.DIMINISHING, 0, g, 1.0)


def test_cap_updates_bounded(tiny_scenario):
    """Updates never exceed the smallest subscription or the slot budget."""
    greedients = np.array([[20.0, 0.0, 1.0], [1.0, 200.0, 0.0]])
    beta = cap_updates(10.0, greedients, tiny_scenario)
    assert beta.tolist() == [[100.0, 0.0, 10.0], [10.0, 100.0, 0.0]]
    with pytest.raises(PreconditionError):
        cap_updates(-1.0, greedients, tiny_scenario)


def test_projection_without_protection():
    """Everybody pays the same λ."""
    assert project_allocation([60.0, 40.0], [30.0, 10.0], 100.0) == pytest.approx([70.0, 30.0])


def test_projection_protects_small_limits():
    """A home that would go negative keeps what it has."""
    assert project_allocation([4.0, 96.0], [0.0, 20.0], 100.0) == pytest.approx([4.0, 96.0])


def test_projection_random_properties():
    """Sum preserved, limits non-negative and the largest update never loses."""
    rng = np.random.default_rng(5)
    for _ in range(500):
        n = int(rng.integers(2, 8))
        current = rng.uniform(0, 100, size=n) * (rng.uniform(size=n) > 0.3)
        beta = rng.uniform(0, 150, size=n) * (rng.uniform(size=n) > 0.3)
        total = float(current.sum())
        out = project_allocation(current, beta, total)

        assert np.all(out >= 0)
        assert out.sum() == pytest.approx(total, abs=1e-9 * max(1.0, total))
        top = int(np.argmax(beta))
        assert out[top] >= current[top] - 1e-9


def test_projection_rejects_negative_updates():
    with pytest.raises(PreconditionError):
        project_allocation([1.0, 1.0], [-1.0, 0.0], 2.0)


def test_sg_stops_when_capacity_is_abundant(small_scenario):
    """Saturated homes send zero greedients, so the first iterate is final."""
    scenario = small_scenario(2 * 5600.0)
    plan, solutions, trace = sg_run(scenario, SgConfig.sg1(k_max=10))

    assert len(trace) == 1
    assert trace.best_k == 1
    assert trace.iterations[0].step is None
    assert np.all(plan.limits == 5600.0)
    assert all(s.utility.vital == pytest.approx(18.0, abs=1e-6) for s in solutions)


@pytest.mark.parametrize("factory", [SgConfig.sg1, SgConfig.sg2])
def test_sg_plans_stay_feasible(small_scenario, factory):
    """Every iterate respects capacity and the best total never decreases."""
    scenario = small_scenario(1500.0)
    plan, solutions, trace = sg_run(scenario, factory(k_max=6, max_workers=2))

    for iteration in trace.iterations:
        assert iteration.plan.is_feasible(scenario.capacity)
        assert np.all(iteration.plan.limits >= 0)
    best_totals = [trace.iterations[it.best_k - 1].total for it in trace.iterations]
    assert all(not (b < a) for a, b in zip(best_totals, best_totals[1:]))
    assert plan == trace.best.plan
    assert len(solutions) == 2


def test_sg_is_deterministic(small_scenario):
    scenario = small_scenario(1500.0)
    first, _, trace_a = sg_run(scenario, SgConfig.sg2(k_max=4))
    second, _, trace_b = sg_run(scenario, SgConfig.sg2(k_max=4))
    assert first == second
    assert [it.total for it in trace_a.iterations] == [it.total for it in trace_b.iterations]


def test_sg_beats_lm_when_shares_are_below_minimal_light(small_scenario):
    """30 W each lights nobody; round robin gives whole slots to one home at a time."""
    from backend.services.home_solver import solve_home

    scenario = small_scenario(60.0)
    env = scenario.environment
    lm = lm_allocate(scenario)
    lm_total = sum(solve_home(h, caps, env).utility.vital for h, caps in zip(scenario.homes, lm.limits))
    _, _, trace = sg_run(scenario, SgConfig.sg1(k_max=3))

    assert trace.best.total.vital > lm_total + 1.0


def test_gm_alternates_heating(tiny_scenario):
    """Only one home can heat per slot; alternating beats splitting 50/50."""
    result = gm_solve_tiny(tiny_scenario, 50.0)

    assert result.utility.vital == pytest.approx(5.808, abs=1e-3)
    assert result.plan.is_feasible(tiny_scenario.capacity)
    assert all(s.power.any() for s in result.schedules)


def test_gm_dominates_lm_and_sg(tiny_scenario):
    from backend.services.home_solver import solve_home

    env = tiny_scenario.environment
    gm = gm_solve_tiny(tiny_scenario, 50.0)
    lm = lm_allocate(tiny_scenario)
    lm_vital = sum(solve_home(h, c, env).utility.vital for h, c in zip(tiny_scenario.homes, lm.limits))
    _, _, trace = sg_run(tiny_scenario, SgConfig.sg1(k_max=5))

    assert lm_vital == pytest.approx(4.6027, abs=1e-3)
    assert trace.iterations[0].total.vital == pytest.approx(gm.utility.vital, abs=1e-3)
    assert gm.utility.vital >= trace.best.total.vital - 1e-3
    assert gm.utility.vital > lm_vital


def test_gm_rejects_large_instances(small_scenario):
    with pytest.raises(InstanceTooLargeError):
        gm_solve_tiny(small_scenario(1000.0, homes=4, horizon=3), 50.0)
    with pytest.raises(InstanceTooLargeError):
        gm_solve_tiny(small_scenario(1000.0, horizon=6), 50.0)


def test_async_over_all_homes_matches_sg_step(small_scenario):
    """Reallocating among every home is one synchronous SG step."""
    scenario = small_scenario(3000.0)
    sg_config = SgConfig.sg1(k_max=2)
    _, _, trace = sg_run(scenario, sg_config)
    start = round_robin_init(scenario)
    moved = async_reallocate(scenario, [h.id for h in scenario.homes], start, sg_config, k=1)

    assert len(trace) == 2
    assert np.allclose(moved.limits, trace.iterations[1].plan.limits)


def test_async_leaves_saturated_pair_alone(small_scenario):
    scenario = small_scenario(2 * 5600.0)
    plan = CapacityPlan(np.full((2, 6), 5600.0))
    assert async_reallocate(scenario, [0, 1], plan) is plan


def test_async_shifts_from_saturated_to_starving(small_scenario):
    """The starving home takes half, and slot sums do not move."""
    scenario = small_scenario(5600.0)
    limits = np.zeros((2, 6))
    limits[1] = 5600.0
    plan = CapacityPlan(limits)
    moved = async_reallocate(scenario, [0, 1], plan, SgConfig.sg1(a1=1000.0))

    assert np.allclose(moved.limits, 2800.0)
    assert np.allclose(moved.totals(), plan.totals())


def test_async_needs_two_known_homes(small_scenario):
    scenario = small_scenario(1000.0)
    plan = round_robin_init(scenario)
    with pytest.raises(PreconditionError):
        async_reallocate(scenario, [0], plan)
    with pytest.raises(PreconditionError):
        async_reallocate(scenario, [0, 7], plan)


def _at_least(a, b, tol=1e-7):
    """Lexicographic a >= b up to float noise."""
    if a.vital > b.vital + tol:
        return True
    return a.vital >= b.vital - tol and a.comfort >= b.comfort - tol


def _random_tiny(make_scenario, rng):
    horizon = int(rng.integers(2, 4))
    # three slots only with fixed heating power, to keep the joint search small
    spread = 0 if horizon == 3 else 2
    blocks = []
    for _ in range(2):
        light_min = float(rng.choice([50, 100]))
        heat_min = 50.0 * int(rng.integers(1, 4))
        blocks.append(
            {
                "lighting": {"p_min": light_min, "p_max": light_min + 50.0 * int(rng.integers(0, 3))},
                "heating": {
                    "p_min": heat_min,
                    "p_max": heat_min + 50.0 * int(rng.integers(0, spread + 1)),
                    "f_coeff": float(rng.uniform(0.005, 0.05)),
                    "g_coeff": float(rng.uniform(0.05, 0.5)),
                },
                "washing": {
                    "power": 50.0 * int(rng.integers(1, 5)),
                    "duration": int(rng.integers(1, 3)),
                    "earliest_start": 1,
                    "deadline": horizon,
                },
                "t_min": 15,
                "t_pref": 22,
                "t_init": float(rng.uniform(12, 22)),
                "t_max": 25,
            }
        )
    exterior = [float(t) for t in rng.uniform(0, 10, size=horizon)]
    scenario = make_scenario(blocks, horizon=horizon, exterior=exterior)
    steps = int(sum(scenario.subscribed) // 50)
    capacity = [50.0 * int(c) for c in rng.integers(0, steps + 1, size=horizon)]
    return scenario.with_capacity(capacity)


@pytest.mark.slow
def test_gm_dominates_on_random_tiny_instances(make_scenario):
    """Over 50 random two-home instances GM is never below LM or the best SG plan."""
    from backend.services.home_solver import solve_home
    from backend.models.utility import utility_sum

    rng = np.random.default_rng(77)
    for _ in range(50):
        scenario = _random_tiny(make_scenario, rng)
        env = scenario.environment
        lm = lm_allocate(scenario)
        lm_total = utility_sum(solve_home(h, c, env).utility for h, c in zip(scenario.homes, lm.limits))
        sg_plan, _, trace = sg_run(scenario, SgConfig.sg1(k_max=5, max_workers=1))

        plain = gm_solve_tiny(scenario, 50.0)
        seeded = gm_solve_tiny(scenario, 50.0, [sg_plan])

        assert plain.plan.is_feasible(scenario.capacity)
        assert seeded.plan.is_feasible(scenario.capacity)
        assert _at_least(plain.utility, lm_total)
        assert _at_least(seeded.utility, lm_total)
        assert _at_least(seeded.utility, trace.best.total)


def test_gm_covers_continuous_heating(make_scenario, heat_only_block):
    """A home that can only afford part of a heating range still gets the exact remainder."""
    block = dict(heat_only_block, t_init=14.0)
    block["heating"] = {"p_min": 50, "p_max": 200, "f_coeff": 0.01, "g_coeff": 0.1}
    block["lighting"] = {"p_min": 50, "p_max": 100}
    scenario = make_scenario([block], horizon=2, capacity=177.78)
    env = scenario.environment
    from backend.services.home_solver import solve_home

    alone = solve_home(scenario.homes[0], list(scenario.capacity), env)
    result = gm_solve_tiny(scenario, 50.0)

    assert _at_least(result.utility, alone.utility)
    assert result.plan.is_feasible(scenario.capacity)


def test_sg_keeps_lm_when_no_iterate_beats_it(make_scenario, class1_block):
    """Three lights sharing 900 W: round robin lights one home, LM lights all three."""
    block = {key: class1_block[key] for key in ("lighting", "t_min", "t_pref", "t_init", "t_max")}
    scenario = make_scenario([dict(block, count=3)], horizon=4, capacity=900.0)
    plan, solutions, trace = sg_run(scenario, SgConfig.sg1(k_max=5))

    assert trace.baseline is not None
    assert trace.iterations[0].total.vital == pytest.approx(4.0)
    assert trace.best_k == 0
    assert trace.iterations_to_best == 0
    assert trace.best is trace.baseline
    assert np.allclose(plan.limits, 300.0)
    assert sum(s.utility.vital for s in solutions) == pytest.approx(12.0)


def test_sg_without_lm_candidate_reports_iterates_only(make_scenario, class1_block):
    block = {key: class1_block[key] for key in ("lighting", "t_min", "t_pref", "t_init", "t_max")}
    scenario = make_scenario([dict(block, count=3)], horizon=4, capacity=900.0)
    _, _, trace = sg_run(scenario, SgConfig.sg1(k_max=3, lm_candidate=False))

    assert trace.baseline is None
    assert trace.best_k >= 1


def test_slot_scale_only_stretches_constant_length_steps():
    from backend.services.aggregator import slot_scale

    budget = np.array([80000.0, 1000.0])
    assert slot_scale(StepRule.CONSTANT_LENGTH, budget, 5600.0) == pytest.approx([80000.0 / 5600.0, 1.0])
    assert slot_scale(StepRule.DIMINISHING, budget, 5600.0).tolist() == [1.0, 1.0]


def test_sg2_spreads_round_robin_in_one_step(make_scenario, class1_block):
    """100 light-only homes at 200 W each: one constant-length step reaches the even split."""
    block = {key: class1_block[key] for key in ("lighting", "t_min", "t_pref", "t_init", "t_max")}
    scenario = make_scenario([dict(block, count=100)], horizon=4, capacity=20000.0)
    _, _, trace = sg_run(scenario, SgConfig.sg2(k_max=3, lm_candidate=False))

    first, second = trace.iterations[0], trace.iterations[1]
    assert first.total.vital == pytest.approx(80.0)
    assert np.allclose(second.plan.limits, 200.0)
    assert second.total.vital == pytest.approx(400.0)
    assert trace.best_k >= 2


@pytest.mark.parametrize("factory", [SgConfig.sg1, SgConfig.sg2])
@pytest.mark.parametrize("capacity", [1500.0, 20000.0])
def test_sg_iterates_use_the_whole_budget(small_scenario, factory, capacity):
    """Every iterate hands out exactly min(C(t), ΣL) in every slot."""
    from backend.services.aggregator import subscription_budget

    scenario = small_scenario(capacity)
    _, _, trace = sg_run(scenario, factory(k_max=6, max_workers=2))
    budget = subscription_budget(scenario)

    for iteration in trace.iterations:
        assert np.allclose(iteration.plan.totals(), budget, rtol=0, atol=1e-6)
        assert np.all(iteration.plan.limits >= 0)


@pytest.mark.parametrize("factory", [SgConfig.sg1, SgConfig.sg2])
def test_sg_finds_the_tiny_optimum_first(tiny_scenario, factory):
    """Round robin already alternates the heaters, so later iterates never count as better."""
    _, _, trace = sg_run(tiny_scenario, factory(k_max=100))

    assert trace.iterations_to_best == 1
    assert trace.best.total.vital == pytest.approx(5.808, abs=1e-3)


@pytest.mark.slow
def test_sg_never_below_lm_on_a_small_sweep(small_scenario):
    """SG1 and SG2 match or beat LM at every point of a reduced homogeneous sweep."""
    from backend.services.harness import SweepSettings, dominance_summary, run_sweep

    scenario = small_scenario(1000.0, homes=3)
    capacities = [3 * c for c in (50.0, 200.0, 400.0, 600.0, 800.0, 1000.0, 1500.0, 2000.0)]
    result = run_sweep(scenario, ["LM", "SG1", "SG2"], capacities, SweepSettings(k_max=20, max_workers=2))
    summary = dominance_summary(result)

    for scheme in ("SG1", "SG2"):
        assert summary[scheme]["points"] == len(capacities)
        assert summary[scheme]["at_least_lm"] >= 0.95
        assert summary[scheme]["mean_iters_to_best"] <= 20


def test_lm_class2_saturates_near_1700_per_home(make_scenario, class1_block, class2_block, env100):
    """With a 50/50 mix, class 2 reaches full vital at the 1708 W grid point but not at 1459 W."""
    from backend.services.harness import default_capacity_grid
    from backend.services.home_solver import solve_home

    grid = default_capacity_grid(100)
    below, above = grid[17] / 100, grid[18] / 100
    assert below == pytest.approx(1459, abs=1)
    assert above == pytest.approx(1708, abs=1)
    vitals = []
    for per_home in (below, above):
        pair = make_scenario([class1_block, class2_block], horizon=100, capacity=2 * per_home)
        class2_caps = lm_allocate(pair).limits[1]
        vitals.append(solve_home(pair.homes[1], class2_caps, env100).utility.vital)

    assert vitals[0] < 299.0
    assert vitals[1] == pytest.approx(300.0, abs=1e-6)
