"""Tests for the sequence-space lift and the truncated lifted system."""

import math

import numpy as np
import pytest

from sdde_analytic.delaycore import Trajectory, eta, eta_iterate
from sdde_analytic.lift import (
    ChainPoint,
    build_lift,
    decay_profile,
    freeze_tail,
    integrate_lifted,
    lift_consistency,
    lifted_frame,
    map_F,
    product_weight,
    rhs_H,
)
from sdde_analytic.models import ModelSetup
from sdde_analytic.seqspace import norm_lm
from sdde_analytic.models.registry import TOY_G0
from sdde_analytic.utils.errors import A2ViolationError, ConfigError, HistoryExhaustedError


class TestBuildLift:
    """The lift w_j = c^{-j} (x, tau)(eta^{j-1}(t))."""

    def test_blocks_match_direct_evaluation(self, toy_setup: ModelSetup, toy_traj: Trajectory):
        model = toy_setup.model
        w = build_lift(toy_traj, 1.0, 12, model)
        unscaled = w.unscaled()
        for j in range(1, 13):
            expected = toy_traj.eval(eta_iterate(toy_traj, 1.0, j - 1))
            np.testing.assert_allclose(unscaled[j - 1].real, expected, atol=1e-10)
        assert w.closure.depth == 12
        assert w.closure.states.shape == (model.tail_count, model.width)
        assert w.full_unscaled().shape == (13, 2)

    def test_exhausted_history_names_feasible_depth(self, toy_setup: ModelSetup, toy_traj: Trajectory):
        with pytest.raises(HistoryExhaustedError) as exc:
            build_lift(toy_traj, 1.0, 60, toy_setup.model)
        assert exc.value.feasible_J == 49
        assert build_lift(toy_traj, 1.0, 49, toy_setup.model).J == 49

    def test_rejects_empty_lift(self, toy_setup: ModelSetup, toy_traj: Trajectory):
        with pytest.raises(ConfigError):
            build_lift(toy_traj, 1.0, 0, toy_setup.model)

    def test_freeze_tail_keeps_states(self, toy_setup: ModelSetup, toy_traj: Trajectory):
        w = build_lift(toy_traj, 1.0, 4, toy_setup.model)
        frozen = freeze_tail(w)
        assert frozen.closure.kind == "frozen"
        assert frozen.closure.source is None
        np.testing.assert_array_equal(frozen.closure.states, w.closure.states)


class TestVectorField:
    def test_map_f_of_toy(self, toy_setup: ModelSetup):
        theta = np.array([[0.4, 1.0], [0.25, 0.8], [0.1, 0.5]])
        out = map_F(theta, 1, toy_setup.model)
        q = 1.0 - TOY_G0
        np.testing.assert_allclose(out, [-0.25 / q, TOY_G0 / q])

    def test_map_f_needs_enough_states(self, toy_setup: ModelSetup):
        with pytest.raises(ConfigError):
            map_F(np.ones((2, 2)), 2, toy_setup.model)

    def test_product_weight_matches_naive_product(self, toy_setup: ModelSetup):
        def g(gamma1: np.ndarray, gamma2: np.ndarray) -> np.ndarray:
            return 0.3 * np.tanh(gamma2) + 0.1 * gamma1[..., 0, 0]

        rng = np.random.default_rng(5)
        chain = [
            ChainPoint(u=rng.uniform(-1.0, 1.0, size=(1, 1)), v=complex(rng.uniform(0.0, 2.0)))
            for _ in range(8)
        ]
        naive = 2.0**-8 * math.prod(1.0 - p.g(g) for p in chain)
        assert product_weight(chain, 8, g, 2.0) == pytest.approx(naive, rel=1e-12)
        assert product_weight(chain, 0, g, 2.0) == 1.0

    def test_product_weight_needs_long_enough_chain(self):
        chain = [ChainPoint(u=np.zeros((1, 1)), v=0j)]
        with pytest.raises(ConfigError):
            product_weight(chain, 2, lambda a, b: 0.0 * b, 2.0)

    def test_rhs_rejects_rate_outside_disk(self, toy_setup: ModelSetup, toy_traj: Trajectory):
        strict = toy_setup.model.with_constants(l=0.75, c=2.0)
        w = build_lift(toy_traj, 1.0, 4, toy_setup.model)
        with pytest.raises(A2ViolationError) as exc:
            rhs_H(w, strict)
        assert exc.value.block == 1

    def test_lift_consistency_on_toy(self, toy_setup: ModelSetup, toy_traj: Trajectory):
        for t in np.linspace(0.25, 2.0, 4):
            check = lift_consistency(toy_traj, float(t), 8, toy_setup.model)
            assert check.observed_order > 1.8
            assert check.richardson_error < 1e-6
            assert len(check.block_errors) == 8

    def test_lift_consistency_needs_two_steps(self, toy_setup: ModelSetup, toy_traj: Trajectory):
        with pytest.raises(ConfigError):
            lift_consistency(toy_traj, 1.0, 4, toy_setup.model, deltas=(0.1,))


class TestLiftStructure:
    """Shift structure, weighted boundedness of H and the single-block reduction."""

    @pytest.fixture
    def neural_model(self, neural_params):
        from sdde_analytic.example41 import build_neural_model

        return build_neural_model(neural_params)

    def _cases(self, toy_setup, toy_traj, neural_traj, neural_model):
        return [(toy_traj, toy_setup.model, 1.0), (neural_traj, neural_model, 15.0)]

    @pytest.mark.parametrize("J", [6, 12])
    def test_lift_of_eta_is_the_shifted_lift(self, toy_setup, toy_traj, neural_traj, neural_model, J):
        for traj, model, t in self._cases(toy_setup, toy_traj, neural_traj, neural_model):
            here = build_lift(traj, t, J, model).seq.blocks
            earlier = build_lift(traj, eta(traj, t), J, model).seq.blocks
            np.testing.assert_allclose(here[1:], earlier[:-1] / model.c, rtol=0.0, atol=1e-12)

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_lifted_field_is_bounded_in_weighted_norm(
        self, toy_setup, toy_traj, neural_traj, neural_model, m
    ):
        for traj, model, t in self._cases(toy_setup, toy_traj, neural_traj, neural_model):
            norms = []
            for J in (20, 40):
                H = rhs_H(build_lift(traj, t, J, model), model)
                norms.append(norm_lm(H, m))
            assert math.isfinite(norms[0])
            assert 40**m * H.block_norms()[-1] < 1e-2 * norms[-1]
            assert norms[1] == pytest.approx(norms[0], rel=1e-12)

    def test_single_block_recovers_the_vector_field(
        self, toy_setup, toy_traj, neural_traj, neural_model
    ):
        for traj, model, t in self._cases(toy_setup, toy_traj, neural_traj, neural_model):
            H = rhs_H(build_lift(traj, t, 1, model), model)
            assert H.trunc_J == 1
            np.testing.assert_allclose(H.unscaled()[0], traj.eval_deriv(t), rtol=0.0, atol=1e-6)


class TestDecay:
    @pytest.mark.parametrize("m", [0, 1, 2, 3])
    def test_constant_rate_closed_form(self, toy_setup: ModelSetup, toy_traj: Trajectory, m: int):
        w = build_lift(toy_traj, 1.0, 40, toy_setup.model)
        profile = decay_profile(w, toy_setup.model, m)
        j = np.arange(1, 41, dtype=float)
        expected = j**m * ((1.0 - TOY_G0) / 2.0) ** j
        np.testing.assert_allclose(profile.values, expected, rtol=1e-10)
        assert profile.eventually_decreasing
        assert profile.max_rate == pytest.approx(1.0 - TOY_G0)

    def test_geometric_bound_dominates(self, toy_setup: ModelSetup, toy_traj: Trajectory):
        w = build_lift(toy_traj, 1.0, 20, toy_setup.model)
        profile = decay_profile(w, toy_setup.model, 0)
        assert np.all(np.asarray(profile.values) <= profile.geometric_bound() * (1 + 1e-12))

    def test_neural_orbit_decays(self, neural_traj: Trajectory):
        from sdde_analytic.example41 import NeuralModelParams, build_neural_model

        model = build_neural_model(NeuralModelParams())
        w = build_lift(neural_traj, 15.0, 40, model)
        profile = decay_profile(w, model, 1)
        assert profile.values[-1] < 1e-3 * profile.values[0]
        assert profile.decays

    def test_negative_exponent(self, toy_setup: ModelSetup, toy_traj: Trajectory):
        w = build_lift(toy_traj, 1.0, 4, toy_setup.model)
        with pytest.raises(ConfigError):
            decay_profile(w, toy_setup.model, -1)


class TestIntegrateLifted:
    def test_first_block_tracks_direct_solution(self, toy_setup: ModelSetup, toy_traj: Trajectory):
        model = toy_setup.model
        w = build_lift(toy_traj, 1.0, 16, model)
        delay = float(toy_traj.tau(1.0))
        lifted = integrate_lifted(model, w, (1.0, 1.0 + delay), 1e-10, toy_traj)
        direct = toy_traj.eval(lifted.t) / model.c
        assert np.max(np.abs(lifted.block(1) - direct)) < 1e-6
        errors = lifted.reference_error(toy_traj, model)
        assert errors.shape == (16,)
        assert np.all(errors < 1e-6)
        mid = 1.0 + delay / 2
        np.testing.assert_allclose(lifted.at(mid)[0], toy_traj.eval(mid) / model.c, atol=1e-6)

    def test_frozen_tail_reports_its_error(self, toy_setup: ModelSetup, toy_traj: Trajectory):
        model = toy_setup.model
        w = build_lift(toy_traj, 1.0, 12, model)
        lifted = integrate_lifted(model, w, (1.0, 1.5), 1e-9, toy_traj, tail="frozen", n_out=11)
        assert lifted.tail == "frozen"
        assert 0.0 < lifted.tail_error < 1e-3
        frame = lifted_frame(lifted)
        assert list(frame.columns) == ["t", "j", "y1", "z", "u1", "v"]
        assert len(frame) == 11 * 12

    def test_rejects_bad_options(self, toy_setup: ModelSetup, toy_traj: Trajectory):
        model = toy_setup.model
        w = build_lift(toy_traj, 1.0, 4, model)
        with pytest.raises(ConfigError):
            integrate_lifted(model, w, (1.0, 1.5), 0.0, toy_traj)
        with pytest.raises(ConfigError):
            integrate_lifted(model, w, (1.0, 1.5), 1e-8, toy_traj, tail="zero")
        with pytest.raises(ConfigError):
            integrate_lifted(model, w, (1.0, 1.5), 1e-8, toy_traj, lam=-0.1)
        rotated = w.with_seq(w.seq.with_blocks(w.seq.blocks * 1j))
        with pytest.raises(ConfigError):
            integrate_lifted(model, rotated, (1.0, 1.5), 1e-8)
