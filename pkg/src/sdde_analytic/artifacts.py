"""Writers for run artifacts: sorted-key JSON reports, CSV tables and the manifest.

Reports never carry timestamps; wall time and dates live only in the manifest.
"""

from __future__ import annotations

import dataclasses
import json
import math
import platform
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np
import pandas as pd
import scipy

from sdde_analytic import __version__

REPORT_SCHEMA = "sdde.report/1"
MANIFEST_SCHEMA = "sdde.manifest/1"
MANIFEST_NAME = "manifest.json"
CSV_FLOAT_FORMAT = "%.17g"


def to_jsonable(value: Any) -> Any:
    """Plain JSON types; complex numbers become {re, im} and non-finite floats strings."""
    if value is None or isinstance(value, (bool, str)):
        return value
    if isinstance(value, Enum):
        return to_jsonable(value.value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        f = float(value)
        return f if math.isfinite(f) else str(f)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": to_jsonable(value.real), "im": to_jsonable(value.imag)}
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return {"re": to_jsonable(value.real), "im": to_jsonable(value.imag)}
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, "to_dict") and callable(value.to_dict):
        return to_jsonable(value.to_dict())
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        out = {f.name: to_jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)}
        for prop in ("status", "passed"):
            attr = getattr(type(value), prop, None)
            if isinstance(attr, property):
                out[prop] = to_jsonable(getattr(value, prop))
        return out
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        return [to_jsonable(v) for v in value]
    if callable(value):
        return getattr(value, "__name__", type(value).__name__)
    return str(value)


def dumps(data: Any) -> str:
    return json.dumps(to_jsonable(data), indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


def write_json(path: Path, data: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(data), encoding="utf-8")
    return path


def read_json(path: Path) -> Any:
    return json.loads(path.read_text(encoding="utf-8"))


def write_csv(path: Path, frame: pd.DataFrame) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    return path


def report_envelope(stage: str, config_block: Mapping[str, Any], body: Any, seed: int) -> dict[str, Any]:
    """Self-describing report: schema, stage, the config it came from and the seed."""
    return {
        "schema": REPORT_SCHEMA,
        "stage": stage,
        "seed": seed,
        "config": dict(config_block),
        "result": body,
    }


def versions() -> dict[str, str]:
    return {
        "sdde-analytic": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
    }


def write_manifest(
    out_dir: Path,
    config: Mapping[str, Any],
    *,
    status: str,
    exit_code: int,
    stages: Iterable[str],
    artifacts: Iterable[Path],
    wall_time: float,
    started_at: datetime,
    error: Mapping[str, Any] | None = None,
) -> Path:
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "status": status,
        "exit_code": exit_code,
        "config": dict(config),
        "seed": config.get("seed"),
        "versions": versions(),
        "stages": list(stages),
        "artifacts": sorted(str(p.relative_to(out_dir)) for p in artifacts),
        "wall_time_s": round(wall_time, 6),
        "started_at": started_at.astimezone(timezone.utc).isoformat(),
        "error": dict(error) if error else None,
    }
    return write_json(out_dir / MANIFEST_NAME, manifest)


def utc_now() -> datetime:
    return datetime.now(timezone.utc)
