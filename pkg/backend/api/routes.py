import io
import logging
from collections import Counter
from flask import Blueprint, Response, jsonify, request
from backend.exceptions import InstanceTooLargeError, PreconditionError, ScenarioError
from backend.models.scenario import scenario_from_dict
from backend.services.harness import FLOAT_FORMAT, SweepSettings, default_capacity_grid, run_sweep

logger = logging.getLogger(__name__)

api_bp = Blueprint("api", __name__)

DOMAIN_ERRORS = (ScenarioError, PreconditionError, InstanceTooLargeError)


@api_bp.route("/", methods=["GET"])
def api_info():
    """API information endpoint."""
    return jsonify({
        "message": "Demand Response Capacity Allocation API",
        "version": "1.0.0",
        "endpoints": {
            "validate": "/api/scenarios/validate - Check a scenario document",
            "sweeps": "/api/sweeps - Run and store a capacity sweep",
            "runs": "/api/runs - List stored sweeps",
            "run": "/api/runs/<id> - Fetch one sweep (?format=csv for the CSV)"
        }
    }), 200


# Initialize the store lazily so the API starts without a database
result_store = None


def get_store():
    """Lazy initialization of the result store."""
    global result_store
    if result_store is None:
        from backend.services.result_store import ResultStore
        result_store = ResultStore()
    return result_store


def _error(message, status):
    return jsonify({"status": "error", "message": message}), status


def _summary(scenario):
    classes = Counter(home.label for home in scenario.homes)
    return {
        "name": scenario.name,
        "horizon": scenario.horizon,
        "homes": len(scenario.homes),
        "classes": dict(classes),
        "subscribed_power": sum(scenario.subscribed),
    }


@api_bp.route("/scenarios/validate", methods=["POST"])
def validate_scenario():
    """Parse a scenario document and summarize it."""
    document = request.get_json(silent=True)
    if document is None:
        return _error("request body must be a JSON scenario document", 400)
    try:
        scenario = scenario_from_dict(document)
        return jsonify({"status": "success", "data": _summary(scenario)}), 200
    except DOMAIN_ERRORS as e:
        return _error(str(e), 400)
    except Exception as e:
        logger.error(f"Error validating scenario: {e}", exc_info=True)
        return _error(str(e), 500)


@api_bp.route("/sweeps", methods=["POST"])
def create_sweep():
    """Run a capacity sweep for a posted scenario and store it."""
    body = request.get_json(silent=True) or {}
    if "scenario" not in body:
        return _error("missing 'scenario'", 400)
    try:
        scenario = scenario_from_dict(body["scenario"])
        schemes = [s.upper() for s in body.get("schemes", ["LM"])]
        capacities = body.get("capacities") or default_capacity_grid(len(scenario.homes))
        settings = SweepSettings(
            k_max=int(body.get("k_max", SweepSettings.k_max)),
            a1=float(body.get("a1", SweepSettings.a1)),
            a2=float(body.get("a2", SweepSettings.a2)),
            temp_grid=float(body.get("temp_grid", SweepSettings.temp_grid)),
        )
        logger.info(f"POST /api/sweeps: {scenario.name}, {schemes}, {len(capacities)} capacities")
        result = run_sweep(scenario, schemes, [float(c) for c in capacities], settings)
        run_id = get_store().save(scenario, schemes, result, {
            "k_max": settings.k_max,
            "a1": settings.a1,
            "a2": settings.a2,
            "temp_grid": settings.temp_grid,
        })
        return jsonify({
            "status": "success",
            "run_id": run_id,
            "data": [row.as_record() for row in result.rows],
            "count": len(result.rows)
        }), 201
    except DOMAIN_ERRORS as e:
        return _error(str(e), 400)
    except (TypeError, ValueError) as e:
        return _error(f"invalid sweep request: {e}", 400)
    except Exception as e:
        logger.error(f"Error running sweep: {e}", exc_info=True)
        return _error(str(e), 500)


@api_bp.route("/runs", methods=["GET"])
def list_runs():
    """List stored sweeps, newest first."""
    try:
        limit = request.args.get("limit", 50, type=int)
        runs = get_store().list_runs(limit=limit)
        return jsonify({"status": "success", "data": runs, "count": len(runs)}), 200
    except Exception as e:
        logger.error(f"Error listing runs: {e}", exc_info=True)
        return _error(str(e), 500)


@api_bp.route("/runs/<int:run_id>", methods=["GET"])
def get_run(run_id: int):
    """One stored sweep as JSON, or as the CSV contract with ?format=csv."""
    try:
        if request.args.get("format") == "csv":
            result = get_store().load_result(run_id)
            if result is None:
                return _error(f"run {run_id} not found", 404)
            buffer = io.StringIO()
            result.to_frame().to_csv(buffer, index=False, float_format=FLOAT_FORMAT)
            return Response(buffer.getvalue(), mimetype="text/csv"), 200
        run = get_store().get_run(run_id)
        if run is None:
            return _error(f"run {run_id} not found", 404)
        return jsonify({"status": "success", "data": run}), 200
    except Exception as e:
        logger.error(f"Error fetching run {run_id}: {e}", exc_info=True)
        return _error(str(e), 500)
