"""Tests for the weighted sequence space and its diagonal operators."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdde_analytic.seqspace import (
    OperatorKind,
    OperatorTag,
    WeightedSeq,
    apply_operator,
    check_operator_norm,
    closed_form_norm,
    cutoff,
    cutoff_deficit,
    estimate_operator_norm,
    finite_section_norm,
    norm_lc,
    norm_linf,
    norm_lm,
    operator_norm_table,
)
from sdde_analytic.utils.errors import ConfigError


class TestNorms:
    """Weighted norms on truncated sequences."""

    def test_norm_lc_single_block(self):
        v = WeightedSeq(np.array([[1.0]]), base_c=2.0)
        assert norm_lc(v) == pytest.approx(2.0)

    def test_norm_lc_zero(self):
        v = WeightedSeq(np.zeros((5, 2)), base_c=3.0)
        assert norm_lc(v) == 0.0

    def test_norm_lc_matches_brute_force(self):
        rng = np.random.default_rng(7)
        blocks = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
        v = WeightedSeq(blocks, base_c=3.0)
        expected = max(3.0 ** (j + 1) * max(abs(z) for z in blocks[j]) for j in range(4))
        assert norm_lc(v) == pytest.approx(expected, rel=1e-14)

    def test_norm_lm_matches_brute_force(self):
        rng = np.random.default_rng(11)
        blocks = rng.standard_normal((6, 2))
        v = WeightedSeq(blocks, base_c=2.0)
        expected = max((j + 1) ** 3 * np.max(np.abs(blocks[j])) for j in range(6))
        assert norm_lm(v, 3) == pytest.approx(expected, rel=1e-14)

    def test_norm_lm_rejects_nonpositive_m(self):
        v = WeightedSeq(np.ones((3, 1)), base_c=2.0)
        with pytest.raises(ConfigError):
            norm_lm(v, 0)

    def test_unscaled_round_trip(self):
        states = np.arange(1.0, 9.0).reshape(4, 2)
        v = WeightedSeq.from_unscaled(states, base_c=2.0)
        np.testing.assert_allclose(v.unscaled().real, states)
        assert norm_linf(v) == pytest.approx(1.0)


class TestWeightedSeqValidation:
    def test_rejects_base_not_above_one(self):
        with pytest.raises(ConfigError):
            WeightedSeq(np.ones((2, 2)), base_c=1.0)

    def test_rejects_non_finite_blocks(self):
        with pytest.raises(ConfigError):
            WeightedSeq(np.array([[1.0, np.nan]]), base_c=2.0)

    def test_rejects_bad_shape(self):
        with pytest.raises(ConfigError):
            WeightedSeq(np.ones((2, 2, 2)), base_c=2.0)

    def test_blocks_are_frozen(self):
        v = WeightedSeq(np.ones((2, 2)), base_c=2.0)
        with pytest.raises(ValueError):
            v.blocks[0, 0] = 5.0


class TestOperatorTags:
    def test_negative_lambda_rejected(self):
        with pytest.raises(ConfigError):
            OperatorTag(OperatorKind.RESOLVENT, -0.1)

    def test_one_minus_lambda_needs_admissible_lambda(self):
        tag = OperatorTag(OperatorKind.ONE_MINUS_LAMBDA_I_MINUS_TINV, 0.6)
        with pytest.raises(ConfigError):
            tag.validate(2.0)
        OperatorTag(OperatorKind.ONE_MINUS_LAMBDA_I_MINUS_TINV, 0.3).validate(2.0)

    def test_kind_accepts_string_value(self):
        tag = OperatorTag("Tinv")
        assert tag.kind is OperatorKind.TINV
        assert tag.label() == "Tinv"


class TestOperatorNorms:
    """Norm identities for T^{-1} and its perturbations."""

    def test_lambda_plus_tinv_reaches_closed_form(self):
        tag = OperatorTag(OperatorKind.LAMBDA_I_PLUS_TINV, 0.3)
        assert estimate_operator_norm(tag, 2.0, 20) == pytest.approx(0.8, abs=1e-9)

    @pytest.mark.parametrize("c", [1.5, 2.0, math.e])
    @pytest.mark.parametrize("lam", [0.0, 0.1, 0.3])
    def test_exact_identities(self, c: float, lam: float):
        J = 64
        assert estimate_operator_norm(OperatorTag(OperatorKind.TINV), c, J) == pytest.approx(
            1.0 / c, abs=1e-12
        )
        lam_tag = OperatorTag(OperatorKind.LAMBDA_I_PLUS_TINV, lam)
        assert estimate_operator_norm(lam_tag, c, J) == pytest.approx(lam + 1.0 / c, abs=1e-12)
        res_tag = OperatorTag(OperatorKind.RESOLVENT, lam)
        assert estimate_operator_norm(res_tag, c, J) == pytest.approx(1.0 / (c * lam + 1.0), abs=1e-12)

    @pytest.mark.parametrize("c", [1.5, 2.0, math.e])
    def test_finite_section_deficits(self, c: float):
        tag = OperatorTag(OperatorKind.I_MINUS_TINV)
        for J in (16, 32, 64):
            assert estimate_operator_norm(tag, c, J) == pytest.approx(1.0 - c**-J, abs=1e-12)
        lam = 0.1
        tag = OperatorTag(OperatorKind.ONE_MINUS_LAMBDA_I_MINUS_TINV, lam)
        gaps = [closed_form_norm(tag, c) - finite_section_norm(tag, c, J) for J in (8, 16, 32)]
        assert gaps[0] > gaps[1] > gaps[2] >= 0.0
        assert estimate_operator_norm(tag, c, 64) == pytest.approx(1.0 - lam - c**-64, abs=1e-12)

    def test_table_matches_finite_sections(self):
        checks = operator_norm_table()
        assert checks
        assert all(check.matches_finite_section for check in checks)
        # lambda = 0 is inadmissible for (1 - lambda) I - T^{-1}
        assert not any(c.tag.startswith("oneMinusLambda") and "lambda=0)" in c.tag for c in checks)

    def test_check_reports_attaining_element(self):
        check = check_operator_norm(OperatorTag(OperatorKind.TINV), 2.0, 10)
        assert check.attained_by == "first_coordinate"
        assert check.deficit == pytest.approx(0.0)

    def test_unbounded_t(self):
        assert closed_form_norm(OperatorTag(OperatorKind.T), 2.0) == math.inf

    def test_estimate_rejects_empty_section(self):
        with pytest.raises(ConfigError):
            estimate_operator_norm(OperatorTag(OperatorKind.TINV), 2.0, 0)


class TestCutoff:
    def test_deficit_formula(self):
        assert cutoff_deficit(2.0, 3, 10) == pytest.approx(2.0**-4)
        assert cutoff_deficit(2.0, 10, 10) == 0.0

    def test_cutoff_error_matches_exhaustive_scan(self):
        rng = np.random.default_rng(3)
        v = WeightedSeq(rng.standard_normal((6, 2)), base_c=2.0)
        full = apply_operator(OperatorTag(OperatorKind.TINV), v)
        diff = norm_linf(full - cutoff(v, 3))
        expected = max(2.0 ** -(j + 1) * np.max(np.abs(v.blocks[j])) for j in range(3, 6))
        assert diff == pytest.approx(expected, rel=1e-14)
        assert diff <= cutoff_deficit(2.0, 3, 6) * norm_linf(v) + 1e-15


class TestApplyOperator:
    """Componentwise action of every diagonal operator on random elements."""

    @staticmethod
    def _random_seqs(c: float, count: int = 20, J: int = 24) -> list[WeightedSeq]:
        rng = np.random.default_rng(int(100 * c))
        return [
            WeightedSeq(rng.standard_normal((J, 2)) + 1j * rng.standard_normal((J, 2)), base_c=c)
            for _ in range(count)
        ]

    def test_resolvent_on_ones(self):
        v = WeightedSeq(np.array([[1.0], [1.0]]), base_c=2.0)
        out = apply_operator(OperatorTag(OperatorKind.RESOLVENT, 0.25), v)
        np.testing.assert_allclose(out.blocks.real, [[1.0 / 1.5], [0.5]], rtol=1e-15)
        assert np.all(out.blocks.imag == 0.0)

    def test_tinv_of_powers(self):
        v = WeightedSeq(np.array([[2.0], [4.0]]), base_c=2.0)
        out = apply_operator(OperatorTag(OperatorKind.TINV), v)
        np.testing.assert_array_equal(out.blocks, [[1.0], [1.0]])

    def test_t_undoes_tinv_exactly_for_binary_base(self):
        t, tinv = OperatorTag(OperatorKind.T), OperatorTag(OperatorKind.TINV)
        for v in self._random_seqs(2.0):
            np.testing.assert_array_equal(apply_operator(t, apply_operator(tinv, v)).blocks, v.blocks)

    @pytest.mark.parametrize("c", [1.5, 2.0, math.e])
    def test_t_undoes_tinv(self, c: float):
        t, tinv = OperatorTag(OperatorKind.T), OperatorTag(OperatorKind.TINV)
        for v in self._random_seqs(c):
            np.testing.assert_allclose(
                apply_operator(t, apply_operator(tinv, v)).blocks, v.blocks, rtol=1e-15, atol=0.0
            )

    @pytest.mark.parametrize("c", [1.5, 2.0, math.e])
    @pytest.mark.parametrize("lam", [0.05, 0.1, 0.3])
    def test_norm_bounds(self, c: float, lam: float):
        bounds = {
            OperatorTag(OperatorKind.TINV): 1.0 / c,
            OperatorTag(OperatorKind.LAMBDA_I_PLUS_TINV, lam): lam + 1.0 / c,
            OperatorTag(OperatorKind.ONE_MINUS_LAMBDA_I_MINUS_TINV, lam): 1.0 - lam,
            OperatorTag(OperatorKind.RESOLVENT, lam): 1.0 / (c * lam + 1.0),
        }
        for v in self._random_seqs(c):
            size = norm_linf(v)
            for tag, bound in bounds.items():
                assert norm_linf(apply_operator(tag, v)) <= bound * size * (1 + 1e-14), tag.label()

    @pytest.mark.parametrize("c", [1.5, 2.0, math.e])
    def test_tinv_bound_is_attained_on_first_coordinate(self, c: float):
        blocks = np.zeros((16, 2), dtype=complex)
        blocks[0] = [3.0 - 4.0j, 1.0]
        out = apply_operator(OperatorTag(OperatorKind.TINV), WeightedSeq(blocks, base_c=c))
        assert norm_linf(out) == pytest.approx(5.0 / c, rel=1e-15)

    @pytest.mark.parametrize("c", [1.5, 2.0, math.e])
    def test_difference_operators_are_componentwise(self, c: float):
        v = self._random_seqs(c, count=1, J=8)[0]
        cj = c ** np.arange(1, 9)[:, None]
        out = apply_operator(OperatorTag(OperatorKind.I_MINUS_TINV), v)
        np.testing.assert_allclose(out.blocks, v.blocks * (1.0 - 1.0 / cj), rtol=1e-15)
        out = apply_operator(OperatorTag(OperatorKind.ONE_MINUS_LAMBDA_I_MINUS_TINV, 0.2), v)
        np.testing.assert_allclose(out.blocks, v.blocks * (0.8 - 1.0 / cj), rtol=1e-14)

    def test_closed_ball_is_closed_at_fixed_truncation(self):
        rng = np.random.default_rng(17)
        limit = WeightedSeq.from_unscaled(rng.uniform(-1.0, 1.0, (12, 2)), base_c=2.0)
        limit = limit.with_blocks(limit.blocks / norm_lc(limit))
        sequence = [limit.with_blocks(limit.blocks * (1.0 - 2.0**-k)) for k in range(1, 40)]
        assert all(norm_lc(v) <= 1.0 for v in sequence)
        distances = [norm_linf(v - limit) for v in sequence]
        assert distances == sorted(distances, reverse=True)
        assert distances[-1] < 1e-11
        assert norm_lc(limit) <= 1.0 + 1e-15


@given(
    c=st.floats(min_value=1.05, max_value=5.0),
    values=st.lists(st.floats(min_value=-1e3, max_value=1e3), min_size=1, max_size=24),
)
@settings(max_examples=200, deadline=None)
def test_norm_lc_of_tinv_is_sup_norm(c: float, values: list[float]) -> None:
    v = WeightedSeq(np.asarray(values), base_c=c)
    w = apply_operator(OperatorTag(OperatorKind.TINV), v)
    assert norm_lc(w) == pytest.approx(norm_linf(v), rel=1e-12, abs=1e-300)
