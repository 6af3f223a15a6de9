import json
import logging
from typing import Any, Dict, List, Optional

from backend.database import connection
from backend.models.results import SweepPoint, SweepRun
from backend.models.scenario import Scenario
from backend.services.harness import SweepResult, SweepRow

logger = logging.getLogger(__name__)


class ResultStore:
    """Persists sweep results and reads them back."""

    def save(self, scenario: Scenario, schemes: List[str], result: SweepResult,
             settings: Optional[Dict[str, Any]] = None) -> int:
        """Store one sweep and return its run id."""
        with connection.get_db() as db:
            try:
                run = SweepRun(
                    scenario_name=scenario.name,
                    homes=len(scenario.homes),
                    horizon=scenario.horizon,
                    schemes=",".join(schemes),
                    settings_json=json.dumps(settings or {}, sort_keys=True),
                )
                for row in result.rows:
                    run.points.append(
                        SweepPoint(
                            capacity=row.capacity,
                            scheme=row.scheme,
                            label=row.label,
                            rel_vital=row.rel_vital,
                            rel_comfort=row.rel_comfort,
                            iters_to_best=row.iters_to_best,
                            wall_s=row.wall_s,
                        )
                    )
                db.add(run)
                db.commit()
                logger.info(f"Stored sweep run {run.id} with {len(result.rows)} rows")
                return run.id
            except Exception as e:
                logger.error(f"Error storing sweep for {scenario.name}: {e}")
                db.rollback()
                raise

    def list_runs(self, limit: int = 50) -> List[Dict[str, Any]]:
        with connection.get_db() as db:
            runs = db.query(SweepRun).order_by(SweepRun.id.desc()).limit(limit).all()
            return [run.to_dict() for run in runs]

    def get_run(self, run_id: int) -> Optional[Dict[str, Any]]:
        with connection.get_db() as db:
            run = db.get(SweepRun, run_id)
            return run.to_dict(with_points=True) if run else None

    def load_result(self, run_id: int) -> Optional[SweepResult]:
        """The stored rows as a SweepResult, in their original order."""
        with connection.get_db() as db:
            run = db.get(SweepRun, run_id)
            if run is None:
                return None
            rows = [
                SweepRow(
                    capacity=p.capacity,
                    scheme=p.scheme,
                    label=p.label,
                    rel_vital=p.rel_vital,
                    rel_comfort=p.rel_comfort,
                    iters_to_best=p.iters_to_best,
                    wall_s=p.wall_s,
                )
                for p in run.points
            ]
            return SweepResult(rows=rows)
