from __future__ import annotations

import numpy as np
import pytest

from sdde_analytic.delaycore import (
    Box,
    HistoryFunction,
    ModelSpec,
    Trajectory,
    integrate_dde,
    residual,
)
from sdde_analytic.models import ModelSetup, pantograph_series
from sdde_analytic.models.registry import TOY_G0, TOY_TAU0
from sdde_analytic.utils.errors import ConfigError, DomainExitError, OutOfDomainError


def _scalar_model(f, g0: float, upper: float = 2.0) -> ModelSpec:
    return ModelSpec(
        name="scalar",
        n=1,
        m=1,
        f=f,
        g=lambda gamma1, gamma2: g0 + 0.0 * gamma2,
        u_box=Box((-upper,), (upper,), strip=0.5),
        v_box=Box((-1.0,), (10.0,), strip=0.5),
        l=0.5,
        c=1.5 if g0 == 0 else 2.0,
    )


def test_toy_matches_pantograph_solution(toy_traj: Trajectory) -> None:
    t_star = -TOY_TAU0 / TOY_G0
    ts = np.linspace(0.0, 4.0, 201)
    exact_x = pantograph_series(ts - t_star, 1.0 - TOY_G0)
    np.testing.assert_allclose(toy_traj.x(ts)[:, 0], exact_x, atol=1e-7)
    np.testing.assert_allclose(toy_traj.tau(ts), TOY_G0 * (ts - t_star), atol=1e-9)


def test_breakpoints_follow_the_delayed_time(toy_traj: Trajectory) -> None:
    q = 1.0 - TOY_G0
    expected = [0.0, 1.0 / q, (1.0 + 1.0 / q) / q]
    assert len(toy_traj.breakpoints) == 3
    np.testing.assert_allclose(toy_traj.breakpoints, expected, atol=1e-9)
    assert toy_traj.meta["breakpoint_order"] == 2


def test_residual_is_small(toy_setup: ModelSetup, toy_traj: Trajectory) -> None:
    ts = np.linspace(0.05, 3.95, 40)
    assert np.max(residual(toy_traj, toy_setup.model, ts)) < 1e-6


def test_constant_delay_reduces_to_method_of_steps() -> None:
    model = _scalar_model(lambda a, b: -b, 0.0)
    traj = integrate_dde(model, HistoryFunction.constant((1.0,), 1.0), 2.0, 1e-10)
    # x = 1 - t on [0, 1], then x' = -(2 - t)
    assert traj.x(1.0)[0] == pytest.approx(0.0, abs=1e-9)
    assert traj.x(2.0)[0] == pytest.approx(-0.5, abs=1e-9)
    np.testing.assert_allclose(traj.tau(np.linspace(0.0, 2.0, 9)), 1.0, atol=1e-12)
    np.testing.assert_allclose(traj.breakpoints[:2], [0.0, 1.0], atol=1e-9)


def test_domain_exit_carries_partial_orbit() -> None:
    model = _scalar_model(lambda a, b: b, 0.3)
    with pytest.raises(DomainExitError) as exc:
        integrate_dde(model, HistoryFunction.constant((1.9,), 1.0), 1.0, 1e-9)
    err = exc.value
    assert err.time == pytest.approx(0.1 / 1.9, abs=1e-6)
    assert "x1 > 2" in err.constraint
    assert isinstance(err.partial, Trajectory)
    assert err.partial.t_max <= 0.1 / 1.9 + 0.1


@pytest.mark.parametrize("tol", [0.0, -1e-6, float("nan")])
def test_rejects_nonpositive_tolerance(toy_setup: ModelSetup, tol: float) -> None:
    with pytest.raises(ConfigError):
        integrate_dde(toy_setup.model, toy_setup.history, 1.0, tol)


def test_rejects_end_before_start(toy_setup: ModelSetup) -> None:
    with pytest.raises(ConfigError):
        integrate_dde(toy_setup.model, toy_setup.history, -1.0, 1e-8)


def test_on_step_sees_increasing_times(toy_setup: ModelSetup) -> None:
    seen: list[float] = []
    integrate_dde(toy_setup.model, toy_setup.history, 1.0, 1e-8, on_step=seen.append)
    assert seen
    assert all(b > a for a, b in zip(seen, seen[1:]))
    assert seen[-1] == pytest.approx(1.0)


class TestTrajectory:
    def test_history_and_solution_agree_at_t0(self, toy_traj: Trajectory):
        left = toy_traj.derivative(0.0, order=0, side="left")
        right = toy_traj.derivative(0.0, order=0, side="right")
        np.testing.assert_allclose(left, right, atol=1e-12)

    def test_eval_outside_domain(self, toy_traj: Trajectory):
        with pytest.raises(OutOfDomainError):
            toy_traj.eval(5.0)
        with pytest.raises(OutOfDomainError):
            toy_traj.eval(-4.0)

    def test_sample_covers_window(self, toy_traj: Trajectory):
        ts, values = toy_traj.sample(11, start=0.0)
        assert ts[0] == 0.0 and ts[-1] == pytest.approx(4.0)
        assert values.shape == (11, 2)

    def test_bad_side(self, toy_traj: Trajectory):
        with pytest.raises(ConfigError):
            toy_traj.derivative(1.0, side="middle")
