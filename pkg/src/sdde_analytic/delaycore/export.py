"""Trajectory export and import.

The JSON layout is self-describing: a header (N, M, c, l, t0, breakpoints), the
history (label, build parameters and samples on a uniform grid), then the segment table with one row of
polynomial coefficients per step.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from sdde_analytic.delaycore.model import HistoryFunction, rebuild_history
from sdde_analytic.delaycore.trajectory import Trajectory
from sdde_analytic.utils.errors import ConfigError

SCHEMA = "sdde.trajectory/1"
HISTORY_SAMPLES = 513


def column_names(n: int) -> list[str]:
    return [f"x{i + 1}" for i in range(n)] + ["tau"]


def trajectory_to_dict(traj: Trajectory, history_samples: int = HISTORY_SAMPLES) -> dict[str, Any]:
    hist_t = np.linspace(traj.t_min, traj.t0, history_samples)
    return {
        "schema": SCHEMA,
        "header": {
            "N": traj.n,
            "M": traj.meta.get("M"),
            "c": traj.meta.get("c"),
            "l": traj.meta.get("l"),
            "t0": traj.t0,
            "t_min": traj.t_min,
            "t_max": traj.t_max,
            "breakpoints": list(traj.breakpoints),
            "meta": dict(traj.meta),
        },
        "history": {
            "label": traj.history.label,
            "params": dict(traj.history.params),
            "t": hist_t.tolist(),
            "values": traj.history(hist_t).tolist(),
        },
        "segments": {
            "t_start": traj.t_start.tolist(),
            "t_end": traj.t_end.tolist(),
            "y_start": traj.y_start.tolist(),
            "q": traj.q.tolist(),
        },
    }


def _load_history(hist: dict[str, Any]) -> HistoryFunction:
    """Rebuild a registered history exactly; anything else comes back piecewise linear."""
    import sdde_analytic.models  # noqa: F401  registers the built-in histories

    label = hist.get("label") or "sampled"
    exact = rebuild_history(label, hist.get("params") or {})
    if exact is not None:
        return exact
    return HistoryFunction.from_samples(np.asarray(hist["t"]), np.asarray(hist["values"]), label=label)


def trajectory_from_dict(data: dict[str, Any]) -> Trajectory:
    if data.get("schema") != SCHEMA:
        raise ConfigError("schema", f"expected {SCHEMA!r}, got {data.get('schema')!r}")
    header = data["header"]
    hist = data["history"]
    history = _load_history(hist)
    seg = data["segments"]
    width = int(header["N"]) + 1
    return Trajectory(
        history=history,
        n=int(header["N"]),
        t_start=np.asarray(seg["t_start"], dtype=float),
        t_end=np.asarray(seg["t_end"], dtype=float),
        y_start=np.asarray(seg["y_start"], dtype=float).reshape(-1, width),
        q=np.asarray(seg["q"], dtype=float).reshape(-1, width, 4),
        breakpoints=tuple(header.get("breakpoints") or ()),
        meta=header.get("meta") or {},
    )


def save_trajectory(traj: Trajectory, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(trajectory_to_dict(traj), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_trajectory(path: Path) -> Trajectory:
    return trajectory_from_dict(json.loads(path.read_text(encoding="utf-8")))


def trajectory_frame(traj: Trajectory, n_points: int = 2001, start: float | None = None) -> pd.DataFrame:
    """Uniform samples (t, x1..xN, tau) for plotting."""
    ts, values = traj.sample(n_points, start=traj.t0 if start is None else start)
    frame = pd.DataFrame(values, columns=column_names(traj.n))
    frame.insert(0, "t", ts)
    return frame


def write_trajectory_csv(traj: Trajectory, path: Path, n_points: int = 2001) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    trajectory_frame(traj, n_points).to_csv(path, index=False, float_format="%.17g")
    return path
