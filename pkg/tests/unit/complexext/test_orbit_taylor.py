from __future__ import annotations

import math

import numpy as np
import pytest

from sdde_analytic.complexext import (
    ComplexOrbit,
    RayQuadrature,
    circle_coefficients,
    fit_radius,
    ray_angles,
    restrict_to_ray,
    taylor_coefficients,
)
from sdde_analytic.utils.errors import ConfigError


class TestRayQuadrature:
    def test_weights_sum_to_one(self):
        quad = RayQuadrature()
        assert quad.size == 24
        assert np.sum(quad.node_weights) == pytest.approx(1.0, abs=1e-14)
        assert np.all(np.diff(quad.xi) > 0)

    def test_cumulative_integral_is_exact_for_polynomials(self):
        quad = RayQuadrature(n_panels=3, n_nodes=6)
        values = (3.0 * quad.xi**2)[None, :]
        np.testing.assert_allclose(quad.integrate(values, axis=1)[0], quad.xi**3, atol=1e-13)

    def test_rejects_degenerate_rules(self):
        with pytest.raises(ConfigError):
            RayQuadrature(n_panels=0)
        with pytest.raises(ConfigError):
            RayQuadrature(n_nodes=1)


def test_ray_angles() -> None:
    np.testing.assert_allclose(ray_angles(4), [0.0, np.pi / 2, np.pi, 3 * np.pi / 2])
    with pytest.raises(ConfigError):
        ray_angles(0)


def _exp_orbit(t0: float = 0.5, h: float = 1.0, n_rays: int = 32) -> ComplexOrbit:
    """Orbit whose single scaled block is e^t."""
    quad = RayQuadrature(n_panels=1, n_nodes=4)
    angles = ray_angles(n_rays)
    times = t0 + h * quad.xi[None, :] * np.exp(1j * angles)[:, None]
    values = 2.0 * np.exp(times)[..., None, None]
    base = np.array([[2.0 * math.exp(t0)], [0.0]])
    return ComplexOrbit(t0, h, angles, quad, values, base, base_c=2.0)


class TestComplexOrbit:
    def test_times_and_restriction(self):
        orbit = _exp_orbit()
        times, values = restrict_to_ray(orbit, 0.0)
        np.testing.assert_allclose(times.imag, 0.0, atol=1e-15)
        np.testing.assert_allclose(values[:, 0, 0], np.exp(times), rtol=1e-14)

    def test_schwarz_defect_of_real_function(self):
        assert _exp_orbit().schwarz_defect() < 1e-13

    def test_conjugate_ray(self):
        orbit = _exp_orbit(n_rays=8)
        assert orbit.conjugate_ray(0) == 0
        assert orbit.conjugate_ray(1) == 7
        assert orbit.ray(np.pi) == 4

    def test_rejects_bad_values(self):
        orbit = _exp_orbit(n_rays=4)
        with pytest.raises(ConfigError):
            orbit.with_values(orbit.values[:, :2])
        with pytest.raises(ConfigError):
            ComplexOrbit(0.0, 0.0, orbit.angles, orbit.quad, orbit.values, orbit.base, 2.0)

    def test_to_dict_holds_scaled_values(self):
        data = _exp_orbit(n_rays=4).to_dict()
        assert data["J"] == 1
        assert len(data["values"]["re"]) == 4


class TestTaylor:
    def test_exponential_coefficients_on_a_circle(self):
        angles = ray_angles(32)
        samples = np.exp(np.exp(1j * angles))
        coeffs = circle_coefficients(samples, 1.0, 9)
        expected = [1.0 / math.factorial(k) for k in range(9)]
        np.testing.assert_allclose(coeffs.real, expected, atol=1e-10)
        np.testing.assert_allclose(coeffs.imag, 0.0, atol=1e-10)

    def test_orbit_coefficients(self):
        orbit = _exp_orbit()
        report = taylor_coefficients(orbit, 9, block=1)
        expected = [math.exp(0.5) / math.factorial(k) for k in range(9)]
        np.testing.assert_allclose(report.coefficients[:, 0, 0].real, expected, atol=1e-10)
        assert report.rho == pytest.approx(orbit.quad.xi[-1])
        assert report.decaying
        assert report.slope < 0
        assert report.radius > 0
        assert report.significant >= 2
        assert not report.constant

    def test_constant_orbit_has_no_slope(self):
        quad = RayQuadrature(n_panels=1, n_nodes=4)
        base = np.array([[2.0], [0.0]])
        orbit = ComplexOrbit.constant(0.0, 0.5, 16, quad, base, 1, 2.0)
        report = taylor_coefficients(orbit, 6)
        assert report.constant
        assert report.radius == math.inf

    def test_fit_radius_of_geometric_sequence(self):
        mags = 0.5 ** np.arange(10)
        significant, slope, radius, constant = fit_radius(mags, 1.0, 1e-10)
        assert significant == 9
        assert slope == pytest.approx(math.log(0.5))
        assert radius == pytest.approx(2.0)
        assert not constant

    def test_rejects_too_few_angles(self):
        with pytest.raises(ConfigError):
            circle_coefficients(np.ones(8), 1.0, 5)
        with pytest.raises(ConfigError):
            circle_coefficients(np.ones(16), 0.0, 5)

    def test_rejects_block_out_of_range(self):
        with pytest.raises(ConfigError):
            taylor_coefficients(_exp_orbit(), 4, block=2)
