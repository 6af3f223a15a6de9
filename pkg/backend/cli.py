"""Command-line experiment driver.

    python -m backend.cli --scenario scenarios/homogeneous.json --scheme lm --scheme sg1 \
        --capacity 1e4:2e5:20 --out results/homogeneous.csv
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from backend import config
from backend.exceptions import InstanceTooLargeError, PreconditionError, ScenarioError
from backend.models.scenario import load_scenario
from backend.services.harness import (
    SCHEMES,
    SweepSettings,
    default_capacity_grid,
    dominance_summary,
    export_trace,
    oracle_check,
    run_sweep,
)
from backend.services.home_solver import SolverSettings

logger = logging.getLogger(__name__)


def parse_capacities(text: str) -> List[float]:
    """`a,b,c` for explicit totals or `lo:hi:n` for n log-spaced totals; empty for none."""
    text = text.strip()
    if not text:
        return []
    try:
        if ":" in text:
            lo, hi, count = text.split(":")
            return [float(c) for c in np.geomspace(float(lo), float(hi), int(count))]
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bad capacity list '{text}': {e}") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Capacity sweeps for demand response allocation schemes")
    parser.add_argument("--scenario", required=True, help="scenario JSON document")
    parser.add_argument("--scheme", action="append", help="gm, lm, sg1 or sg2; repeat or comma-separate")
    parser.add_argument("--capacity", type=parse_capacities, help="total capacities: a,b,c or lo:hi:n")
    parser.add_argument("--kmax", type=int, default=config.SG_KMAX)
    parser.add_argument("--a1", type=float, default=config.SG_A1, help="diminishing step coefficient")
    parser.add_argument("--a2", type=float, default=config.SG_A2, help="constant step length coefficient")
    parser.add_argument("--out", default="sweep.csv", help="CSV output path")
    parser.add_argument("--trace", help="write Sub-Greedient traces here")
    parser.add_argument("--temp-grid", type=float, default=config.TEMP_GRID, help="°C between solver temperature states")
    parser.add_argument("--oracle-check", action="store_true", help="validate the home solver by brute force and exit")
    parser.add_argument("--gm-grid", type=float, default=50.0, help="power quantum of the GM oracle (W)")
    parser.add_argument("--timings", action="store_true", help="record wall time per sweep point")
    parser.add_argument("--workers", type=int, default=config.MAX_WORKERS)
    parser.add_argument("--save", action="store_true", help="also store the sweep in the results database")
    return parser


def _schemes(values: Optional[List[str]]) -> List[str]:
    if not values:
        return ["LM", "SG1", "SG2"]
    schemes = [part.strip().upper() for value in values for part in value.split(",") if part.strip()]
    unknown = [s for s in schemes if s not in SCHEMES]
    if unknown:
        raise PreconditionError(f"unknown schemes {unknown}; choose from {[s.lower() for s in SCHEMES]}")
    return schemes


def _trace_paths(base: Path, keys) -> dict:
    keys = list(keys)
    if len(keys) == 1:
        return {keys[0]: base}
    return {
        (scheme, capacity): base.with_name(f"{base.stem}_{scheme.lower()}_{capacity:g}{base.suffix or '.csv'}")
        for scheme, capacity in keys
    }


def _run_oracle_check(scenario, args) -> int:
    checks = oracle_check(scenario, settings=SolverSettings(temp_grid=args.temp_grid))
    failures = 0
    for check in checks:
        status = "ok" if check.ok else "FAIL"
        failures += not check.ok
        print(
            f"{check.label:>10} cap={check.cap:8g}  solver=({check.solver.vital:.4f}, {check.solver.comfort:.4f})  "
            f"brute=({check.brute_force.vital:.4f}, {check.brute_force.comfort:.4f})  {status}"
        )
    print(f"{len(checks) - failures}/{len(checks)} oracle checks passed")
    return 0 if failures == 0 else 1


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario)
        if args.oracle_check:
            return _run_oracle_check(scenario, args)
        schemes = _schemes(args.scheme)
        capacities = args.capacity if args.capacity is not None else default_capacity_grid(len(scenario.homes))
        settings = SweepSettings(
            k_max=args.kmax,
            a1=args.a1,
            a2=args.a2,
            temp_grid=args.temp_grid,
            gm_grid=args.gm_grid,
            max_workers=args.workers,
            timings=args.timings,
        )
        logger.info(f"Sweeping {scenario.name}: {schemes} over {len(capacities)} capacities")
        result = run_sweep(scenario, schemes, capacities, settings, out=args.out)
        if args.trace and result.traces:
            for key, path in _trace_paths(Path(args.trace), result.traces).items():
                export_trace(result.traces[key], path)
        if args.save:
            from backend.database.connection import init_db
            from backend.services.result_store import ResultStore

            init_db()
            run_id = ResultStore().save(scenario, schemes, result, {"k_max": args.kmax, "a1": args.a1, "a2": args.a2})
            print(f"stored as run {run_id}")
    except (ScenarioError, PreconditionError, InstanceTooLargeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    print(f"wrote {len(result.rows)} rows to {args.out}")
    for scheme, stats in dominance_summary(result).items():
        print(
            f"{scheme}: >= LM at {stats['at_least_lm']:.0%} of {stats['points']} points, "
            f"strictly better at {stats['strictly_better']:.0%}, "
            f"mean iterations to best {stats['mean_iters_to_best']:.1f}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
