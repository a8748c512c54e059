from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from sdde_analytic.delaycore import (
    HistoryFunction,
    Trajectory,
    load_trajectory,
    save_trajectory,
    trajectory_frame,
    write_trajectory_csv,
)
from sdde_analytic.delaycore.export import SCHEMA, trajectory_from_dict, trajectory_to_dict
from sdde_analytic.lift import build_lift
from sdde_analytic.models import ModelSetup
from sdde_analytic.utils.errors import ConfigError


def _stub_trajectory(history: HistoryFunction) -> Trajectory:
    """A trajectory that is all history, no integrated segments."""
    return Trajectory(history, 1, np.empty(0), np.empty(0), np.empty((0, 2)), np.empty((0, 2, 4)))


def test_saved_trajectory_reloads(tmp_path: Path, toy_traj: Trajectory) -> None:
    path = save_trajectory(toy_traj, tmp_path / "run" / "trajectory_data.json")
    loaded = load_trajectory(path)

    ts = np.linspace(0.0, 4.0, 33)
    np.testing.assert_allclose(loaded.eval(ts), toy_traj.eval(ts), atol=1e-14)
    assert loaded.breakpoints == pytest.approx(toy_traj.breakpoints)
    assert loaded.meta["model"] == "toy-scalar"
    assert loaded.history.label == "pantograph"
    early = np.linspace(-3.3, 0.0, 17)
    np.testing.assert_allclose(loaded.eval(early), toy_traj.eval(early), rtol=1e-15, atol=0.0)


def test_reloaded_lift_walks_the_exact_history(
    tmp_path: Path, toy_setup: ModelSetup, toy_traj: Trajectory
) -> None:
    loaded = load_trajectory(save_trajectory(toy_traj, tmp_path / "t.json"))
    original = build_lift(toy_traj, 1.0, 40, toy_setup.model)
    again = build_lift(loaded, 1.0, 40, toy_setup.model)
    np.testing.assert_allclose(again.unscaled(), original.unscaled(), rtol=1e-15, atol=0.0)


def test_constant_history_is_rebuilt() -> None:
    history = HistoryFunction.constant((0.1,), 1.0, t0=2.0, length=3.0)
    data = trajectory_to_dict(_stub_trajectory(history))
    assert data["history"]["params"] == {"x0": [0.1], "tau0": 1.0, "t0": 2.0, "length": 3.0}
    rebuilt = trajectory_from_dict(data).history
    assert rebuilt.label == "constant"
    assert rebuilt.derivative is not None
    np.testing.assert_array_equal(rebuilt(np.array([-1.0, 2.0])), history(np.array([-1.0, 2.0])))


def test_unregistered_history_falls_back_to_samples() -> None:
    history = HistoryFunction(0.0, 1.0, lambda ts: np.stack([ts**2, 1.0 + 0 * ts], axis=-1), label="mine")
    loaded = trajectory_from_dict(trajectory_to_dict(_stub_trajectory(history), history_samples=5)).history
    assert loaded.label == "mine"
    # piecewise linear through (0.5, 0.25) and (0.75, 0.5625)
    np.testing.assert_allclose(loaded(0.625), [0.40625, 1.0])


def test_bad_history_params_are_rejected(toy_traj: Trajectory) -> None:
    data = trajectory_to_dict(toy_traj)
    data["history"]["params"] = {"g0": 0.3, "speed": 2.0}
    with pytest.raises(ConfigError):
        trajectory_from_dict(data)


def test_wrong_schema_is_rejected(tmp_path: Path, toy_traj: Trajectory) -> None:
    path = save_trajectory(toy_traj, tmp_path / "t.json")
    data = json.loads(path.read_text(encoding="utf-8"))
    assert data["schema"] == SCHEMA
    data["schema"] = "something/else"
    path.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(ConfigError):
        load_trajectory(path)


def test_frame_and_csv(tmp_path: Path, toy_traj: Trajectory) -> None:
    frame = trajectory_frame(toy_traj, n_points=21)
    assert list(frame.columns) == ["t", "x1", "tau"]
    assert frame["t"].iloc[0] == 0.0

    path = write_trajectory_csv(toy_traj, tmp_path / "trajectory.csv", n_points=21)
    back = pd.read_csv(path)
    np.testing.assert_allclose(back.to_numpy(), frame.to_numpy(), rtol=1e-15)
