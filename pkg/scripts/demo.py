#!/usr/bin/env python3
"""Demo: one home under a few capacity limits, then LM against Sub-Greedient on a scarce slot budget."""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from backend.models.scenario import load_scenario
from backend.services.aggregator import SgConfig, lm_allocate, sg_run
from backend.services.home_solver import solve_home
from backend.services.harness import relative_utility

SCENARIOS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "scenarios")


def demo_single_home(scenario):
    """Show how one class-1 home spends different per-slot limits."""
    print("\n=== One home under a flat per-slot limit ===\n")
    home = scenario.homes[0]
    env = scenario.environment
    print(f"{'limit (W)':>10} {'vital':>8} {'comfort':>8} {'wash start':>11}")
    print("-" * 42)
    for cap in (0, 50, 600, 1000, 1050, 2000, home.subscribed_power):
        solution = solve_home(home, [cap] * scenario.horizon, env)
        start = solution.schedule.wash_start
        print(f"{cap:>10g} {solution.utility.vital:>8.2f} {solution.utility.comfort:>8.2f} {str(start):>11}")


def demo_schemes(scenario, per_home):
    """Compare LM and SG-1 at one capacity."""
    point = scenario.with_capacity(per_home * len(scenario.homes))
    env = point.environment
    print(f"\n=== {len(point.homes)} homes at {per_home:g} W per home ===\n")
    plan = lm_allocate(point)
    lm = [solve_home(h, caps, env).utility for h, caps in zip(point.homes, plan.limits)]
    _, solutions, trace = sg_run(point, SgConfig.sg1(k_max=20))
    sg = [s.utility for s in solutions]
    for name, utilities in (("LM", lm), ("SG1", sg)):
        for label, (vital, comfort) in relative_utility(utilities, point.homes, env).items():
            print(f"{name:>4} {label:>8}: relative vital {vital:.3f}, comfort {comfort:.3f}")
    print(f"SG1 best found at iteration {trace.iterations_to_best} of {len(trace)}")


def main():
    scenario = load_scenario(os.path.join(SCENARIOS, "homogeneous.json"))
    demo_single_home(scenario)
    small = scenario.restricted([h.id for h in scenario.homes[:10]])
    demo_schemes(small, 400.0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
