"""Deterministic exports: trajectory CSV and report/sweep JSON.

Running the same experiment twice must produce byte-identical files, so
floats are serialized via repr (shortest round-trip form), JSON keys are
sorted, and no timestamps or environment details are embedded beyond the
kernel backend name already inside the report.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import ConfigError
from ..parabolic import Trajectory
from .run import RunReport, SweepResult

SCHEMA_VERSION = 1

CSV_HEADER = "t,sup_u,sup_v,ls_u,lr_v,res_u,res_v"


def trajectory_csv(traj: Trajectory, path) -> Path:
    """Write the norm time series as CSV (one row per recorded step)."""
    path = Path(path)
    rows = [CSV_HEADER]
    for i in range(traj.times.size):
        rows.append(
            ",".join(
                repr(float(col[i]))
                for col in (
                    traj.times,
                    traj.sup_u,
                    traj.sup_v,
                    traj.norm_u,
                    traj.norm_v,
                    traj.res_u,
                    traj.res_v,
                )
            )
        )
    path.write_text("\n".join(rows) + "\n")
    return path


def _json_ready(obj):
    """Recursively coerce payloads to JSON-safe plain types."""
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        if obj != obj or obj in (float("inf"), float("-inf")):
            return None
        return obj
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    try:
        return _json_ready(obj.item())
    except AttributeError:
        raise ConfigError(f"cannot serialize {type(obj).__name__} to JSON") from None


def _write_json(payload: dict, path: Path) -> Path:
    payload = dict(payload)
    payload["schema_version"] = SCHEMA_VERSION
    path.write_text(json.dumps(_json_ready(payload), indent=2, sort_keys=True) + "\n")
    return path


def report_json(report: RunReport, path) -> Path:
    return _write_json(report.to_dict(), Path(path))


def sweep_json(result: SweepResult, path) -> Path:
    return _write_json(result.to_dict(), Path(path))


def export(obj, path_prefix) -> list:
    """Write the standard files for a result object.

    Trajectories produce <prefix>.csv; run reports produce <prefix>.json
    plus <prefix>.csv of their trajectory; sweeps produce <prefix>.json.
    """
    prefix = Path(path_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(obj, Trajectory):
        return [trajectory_csv(obj, prefix.with_suffix(".csv"))]
    if isinstance(obj, RunReport):
        return [
            report_json(obj, prefix.with_suffix(".json")),
            trajectory_csv(obj.trajectory, prefix.with_suffix(".csv")),
        ]
    if isinstance(obj, SweepResult):
        return [sweep_json(obj, prefix.with_suffix(".json"))]
    raise ConfigError(f"don't know how to export {type(obj).__name__}")
