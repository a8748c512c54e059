"""Tests for the (A2) grid check, the (l, c) search and the parameter conditions."""

import numpy as np
import pytest

from sdde_analytic.assumptions import ALPHA5_THRESHOLD, check_A2, check_alpha, search_lc
from sdde_analytic.delaycore import Box, ModelSpec
from sdde_analytic.example41 import NeuralModelParams, build_neural_model, bump_h, default_b
from sdde_analytic.models import toy_scalar_model
from sdde_analytic.utils.errors import AlphaConditionError, ConfigError


def _sloped_model(slope: float = 0.05) -> ModelSpec:
    """g = 0.3 + slope * x, so 1 - g sweeps [0.7 - 2 slope, 0.7 + 2 slope] on U."""
    return ModelSpec(
        name="sloped",
        n=1,
        m=1,
        f=lambda a, b: -b,
        g=lambda gamma1, gamma2: 0.3 + slope * gamma1[..., 0, 0] + 0.0 * gamma2,
        u_box=Box((-2.0,), (2.0,), strip=0.5),
        v_box=Box((0.0,), (1.0,), strip=0.5),
        l=0.5,
        c=2.0,
    )


class TestCheckA2:
    def test_toy_passes_with_constant_margin(self):
        report = check_A2(toy_scalar_model(), grid_density=9)
        assert report.passed
        assert report.status == "PASS"
        assert report.worst_margin == pytest.approx(0.2)
        assert report.sampling == "tensor"
        assert report.n_points == 81
        assert "density 9" in report.verified_at

    def test_rate_on_the_boundary_fails(self):
        # 1 - g = c sits on the circle, margin zero
        report = check_A2(toy_scalar_model(g0=1.0 - 2.0), grid_density=5)
        assert not report.passed
        assert report.worst_margin == pytest.approx(0.0, abs=1e-15)
        assert report.worst_value == pytest.approx((2.0, 0.0))

    def test_rate_at_the_centre_has_full_margin(self):
        report = check_A2(toy_scalar_model(g0=1.0 - 1.25), grid_density=5)
        assert report.worst_margin == pytest.approx(0.75)

    def test_strip_corners_are_included(self):
        report = check_A2(_sloped_model(), grid_density=9, include_strip=True)
        plain = check_A2(_sloped_model(), grid_density=9)
        assert report.strip_width_tested == 0.5
        assert len(report.notes) == 2
        assert report.worst_margin < plain.worst_margin
        assert plain.worst_margin == pytest.approx(0.75 - abs(0.6 - 1.25))

    def test_large_grids_fall_back_to_latin_hypercube(self):
        report = check_A2(toy_scalar_model(), grid_density=33, max_points=100, lhs_samples=500, seed=4)
        assert report.sampling == "latin-hypercube"
        assert report.n_points == 500
        assert report.worst_margin == pytest.approx(0.2)

    def test_threads_give_the_same_answer(self):
        model = _sloped_model()
        serial = check_A2(model, grid_density=300)
        threaded = check_A2(model, grid_density=300, workers=3)
        assert threaded.worst_margin == serial.worst_margin
        assert threaded.worst_point == serial.worst_point

    def test_density_must_be_at_least_two(self):
        with pytest.raises(ConfigError):
            check_A2(toy_scalar_model(), grid_density=1)

    def test_neural_model_passes_with_strip(self):
        model = build_neural_model(NeuralModelParams())
        report = check_A2(model, grid_density=13, include_strip=True)
        assert report.passed
        assert report.grid_density == (13, 13, 13)


class TestSearchLC:
    def test_constant_rate(self):
        result = search_lc(toy_scalar_model(g0=0.0), resolution=5)
        assert result.feasible
        assert (result.l, result.c) == pytest.approx((0.5, 1.5))
        assert result.margin == pytest.approx(0.5)
        assert not result.complex_values

    def test_ignores_the_model_constants(self):
        result = search_lc(toy_scalar_model(l=0.9, c=1.1), resolution=5)
        assert (result.l, result.c) == pytest.approx((0.35, 1.05))

    def test_rate_below_one_is_infeasible(self):
        result = search_lc(_sloped_model(), resolution=9)
        assert not result.feasible
        assert result.w_min == pytest.approx(0.6)
        assert result.w_max == pytest.approx(0.8)
        assert "0 < l < 1 < c" in result.reason

    def test_complex_values_use_an_enclosing_disk(self):
        result = search_lc(_sloped_model(slope=-0.2), resolution=9, include_strip=True)
        assert result.complex_values
        assert result.l < result.w_min
        assert result.c > result.w_max


class TestCheckAlpha:
    def test_default_parameters_pass(self):
        params = NeuralModelParams()
        report = check_alpha(params, default_b, bump_h(params.h0, params.h1))
        assert report.passed, [c.detail for c in report.failed()]
        assert [c.name for c in report.conditions] == ["alpha1", "alpha2", "alpha3", "alpha4", "alpha5"]
        report.raise_for_failure()

    def test_h0_below_threshold_fails_alpha5(self):
        params = NeuralModelParams(h0=0.51)
        assert params.h0 < ALPHA5_THRESHOLD
        report = check_alpha(params, default_b, bump_h(params.h0, params.h1))
        assert [c.name for c in report.failed()] == ["alpha5"]
        assert report.condition("alpha5").value < 0
        with pytest.raises(AlphaConditionError) as exc:
            report.raise_for_failure()
        assert exc.value.condition == "alpha5"

    def test_wrong_slope_fails_alpha1(self):
        params = NeuralModelParams()
        report = check_alpha(params, lambda y: -2.0 * np.tanh(y), bump_h(params.h0, params.h1))
        assert not report.condition("alpha1").passed

    def test_increasing_b_fails_alpha3(self):
        params = NeuralModelParams()
        report = check_alpha(params, np.tanh, bump_h(params.h0, params.h1))
        assert not report.condition("alpha3").passed
        assert not report.condition("alpha4").passed

    def test_unknown_condition(self):
        params = NeuralModelParams()
        report = check_alpha(params, default_b, bump_h(params.h0, params.h1))
        with pytest.raises(KeyError):
            report.condition("alpha9")
