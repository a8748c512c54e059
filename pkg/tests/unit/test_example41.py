from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from sdde_analytic.config import RunConfig
from sdde_analytic.delaycore import Trajectory
from sdde_analytic.example41 import (
    C_CONST,
    L_CONST,
    NeuralModelParams,
    RangeBox,
    build_neural_model,
    bump_h,
    default_history,
    load_params,
    orbit_inequalities,
    run_full_pipeline,
    save_params,
    tau_upper,
    verify_range_box,
)
from sdde_analytic.utils.errors import EXIT_FAIL, AlphaConditionError, ConfigError, StageFailure


class TestParams:
    def test_defaults(self):
        params = NeuralModelParams()
        assert (params.mu, params.sigma, params.h0, params.h1) == (1.0, 2.0, 0.6, 0.8)
        assert params.M_sigma == pytest.approx(5.0)
        assert params.epsilon_strip == 0.1

    def test_yaml_round_trip(self, tmp_path: Path):
        params = NeuralModelParams(sigma=1.5, h0=0.65)
        path = save_params(params, tmp_path / "params.yaml")
        assert load_params(path) == params

    def test_unknown_key_is_named(self, tmp_path: Path):
        path = tmp_path / "params.yaml"
        path.write_text("mu: 1.0\nnu: 2.0\n", encoding="utf-8")
        with pytest.raises(ConfigError) as exc:
            load_params(path)
        assert exc.value.field_name == "nu"

    def test_non_numeric_value(self):
        with pytest.raises(ConfigError):
            NeuralModelParams.from_mapping({"sigma": "strong"})

    def test_missing_file(self, tmp_path: Path):
        with pytest.raises(ConfigError):
            load_params(tmp_path / "absent.yaml")

    @pytest.mark.parametrize("kwargs", [{"mu": 0.0}, {"epsilon_strip": 2.0}, {"M_sigma": -1.0}])
    def test_invalid_values(self, kwargs):
        with pytest.raises(ConfigError):
            NeuralModelParams(**kwargs)


class TestModel:
    @pytest.mark.parametrize("h0", [0.55, 0.6, 0.9])
    def test_tau_upper_solves_the_bound(self, h0: float):
        assert h0 * (1.0 + math.tanh(tau_upper(h0))) == pytest.approx(1.0)

    def test_tau_upper_needs_h0_above_half(self):
        with pytest.raises(ConfigError):
            tau_upper(0.5)

    @pytest.mark.parametrize("h0, h1", [(0.5, 0.8), (0.7, 0.6), (0.6, 1.0)])
    def test_build_rejects_bad_bump(self, h0: float, h1: float):
        with pytest.raises(ConfigError):
            build_neural_model(NeuralModelParams(h0=h0, h1=h1))

    def test_constants_and_boxes(self):
        params = NeuralModelParams()
        model = build_neural_model(params)
        assert (model.l, model.c) == (L_CONST, C_CONST)
        assert model.n == 2 and model.m == 1
        assert model.u_box.upper == (5.0, 5.0)
        assert model.v_box.upper[0] == pytest.approx(tau_upper(0.6))

    def test_bump_stays_inside_its_band(self):
        h = bump_h(0.6, 0.8)
        x = np.random.default_rng(0).normal(scale=10.0, size=(500, 2))
        values = h(x)
        assert np.all(values >= 0.7) and np.all(values < 0.8)
        assert h(np.zeros(2)) == pytest.approx(0.7)

    def test_history_delay_is_inside_the_box(self):
        params = NeuralModelParams(h0=0.9)
        history = default_history(params)
        tau0 = history(0.0)[2]
        assert 0 < tau0 <= tau_upper(0.9) / 2


class TestOrbitChecks:
    def test_orbit_stays_in_the_range_box(self, neural_params: NeuralModelParams, neural_traj: Trajectory):
        report = verify_range_box(neural_traj, RangeBox.from_params(neural_params), start=20.0)
        assert report.passed
        assert report.status == "PASS"
        assert report.min_distance > 0
        assert report.window == pytest.approx((20.0, 40.0))

    def test_small_box_is_violated(self, neural_traj: Trajectory):
        report = verify_range_box(neural_traj, RangeBox((-0.1, 0.1), (0.0, 0.1)), n_samples=201)
        assert not report.passed
        assert report.violation_times
        assert report.min_distance < 0

    def test_inequality_chain(self, neural_params: NeuralModelParams, neural_traj: Trajectory):
        model = build_neural_model(neural_params)
        chain = orbit_inequalities(neural_traj, neural_params, model, start=20.0)
        assert chain.passed
        assert chain.tanh_bounds == pytest.approx((1.0, 1.0 / 0.6))
        assert L_CONST < chain.rate_range[0] <= chain.rate_range[1] < C_CONST


class TestPipeline:
    def test_halts_at_the_parameter_conditions(self):
        seen: list[str] = []
        with pytest.raises(StageFailure) as exc:
            run_full_pipeline(NeuralModelParams(h0=0.51), on_stage=lambda name, _: seen.append(name))
        assert exc.value.stage == "check_alpha"
        assert isinstance(exc.value.cause, AlphaConditionError)
        assert exc.value.exit_code == EXIT_FAIL
        assert exc.value.partial == {"stages": []}
        assert seen == []

    def test_short_run_completes(self):
        config = RunConfig(
            subcommand="example41",
            model="example41",
            t_end=40.0,
            lift_J=8,
            grid_density=9,
            n_stages=3,
            n_rays=8,
            n_nodes=6,
            n_coeffs=4,
            workers=1,
        )
        seen: list[str] = []
        result = run_full_pipeline(NeuralModelParams(), config, on_stage=lambda name, _: seen.append(name))
        assert seen == [
            "check_alpha",
            "check_A2",
            "integrate_dde",
            "verify_range_box",
            "decay_profile",
            "lambda_continuation",
            "taylor_coefficients",
        ]
        assert result.passed
        assert result.continuation is not None and len(result.continuation.records) == 3
        assert result.lipschitz_l0 is not None and result.lipschitz_l0 > 0
        assert result.taylor is not None and result.taylor.radius > 0
