from __future__ import annotations

from pathlib import Path

import pytest

from sdde_analytic.delaycore import Trajectory, integrate_dde
from sdde_analytic.example41 import NeuralModelParams, build_neural_model, default_history
from sdde_analytic.models import ModelSetup, pantograph_history, toy_scalar_model
from sdde_analytic.settings import settings

TOY_TOL = 1e-10


@pytest.fixture(autouse=True)
def _isolated_home(tmp_path: Path, monkeypatch) -> None:
    """Keep user models and run directories out of the real home."""
    home = tmp_path / "sdde-home"
    monkeypatch.setenv("SDDE_HOME", str(home))
    monkeypatch.setenv("SDDE_WORKERS", "1")
    monkeypatch.delenv("SDDE_OUT_DIR", raising=False)
    monkeypatch.setattr(settings, "home", home)
    monkeypatch.setattr(settings, "out_dir", None)
    monkeypatch.setattr(settings, "workers", 1)


@pytest.fixture(scope="session")
def toy_setup() -> ModelSetup:
    return ModelSetup(toy_scalar_model(), pantograph_history(), t_end=4.0, anchor_t=1.0)


@pytest.fixture(scope="session")
def toy_traj(toy_setup: ModelSetup) -> Trajectory:
    return integrate_dde(toy_setup.model, toy_setup.history, toy_setup.t_end, TOY_TOL)


@pytest.fixture(scope="session")
def neural_params() -> NeuralModelParams:
    return NeuralModelParams()


@pytest.fixture(scope="session")
def neural_traj(neural_params: NeuralModelParams) -> Trajectory:
    model = build_neural_model(neural_params)
    return integrate_dde(model, default_history(neural_params), 40.0, 1e-9)
