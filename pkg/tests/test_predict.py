import math
import warnings

import pytest
from hypothesis import given, strategies as st

from lsrefine.precision import DOUBLE_SINGLE, EXTENDED_DOUBLE
from lsrefine.predict import (aug_r_convergence, aug_x_convergence, cost_model,
                              csne_one_step, evaluate_conditions,
                              kappa_augmented, ls_recognition, sn_convergence,
                              sn_limiting, sn_recognition)

U_SINGLE = 2.0 ** -24
U_DOUBLE = 2.0 ** -53


class TestLsRecognition:
    def test_small_product_holds(self):
        assert ls_recognition(10.0, 1e-3)          # 0.1 < 1

    def test_large_product_fails(self):
        assert not ls_recognition(1e2, 1.0)        # 1e4 >= 1

    def test_compatible_always_holds(self):
        assert ls_recognition(1e12, 0.0)


class TestSnRecognition:
    def test_inside_region(self):
        assert sn_recognition(1e3, 1.0, 1.0, U_SINGLE)     # 1e6 < ~1.7e7

    def test_outside_region(self):
        assert not sn_recognition(1e5, 1.0, 1.0, U_SINGLE)  # 1e10 >= ~1.7e7

    def test_zero_residual(self):
        assert sn_recognition(1e9, 0.0, 1.0, U_SINGLE)


class TestSnConvergence:
    def test_single_threshold(self):
        assert U_SINGLE ** -0.5 == pytest.approx(4.08e3, rel=0.02)
        assert sn_convergence(1e3, U_SINGLE)
        assert not sn_convergence(1e4, U_SINGLE)

    def test_double_threshold(self):
        assert U_DOUBLE ** -0.5 == pytest.approx(9.5e7, rel=0.02)
        assert sn_convergence(1e7, U_DOUBLE)


class TestSnLimiting:
    def test_examples(self):
        assert sn_limiting(1e3, 1.0, U_SINGLE, U_DOUBLE)       # 3.3e-10 < 6e-8
        assert not sn_limiting(1e6, 1.0, U_SINGLE, U_DOUBLE)   # 3.3e-4 >= 6e-8
        assert sn_limiting(1.0, 0.0, U_SINGLE, U_DOUBLE)
        assert sn_limiting(1.0, 0.0, U_DOUBLE, 2.0 ** -113)


class TestCsneOneStep:
    def test_examples(self):
        assert csne_one_step(1e5, 0.0, U_DOUBLE)       # 2.2e-1 < 1
        assert not csne_one_step(1e6, 0.0, U_DOUBLE)   # 2.2e2 >= 1

    def test_cube_root_restatement(self):
        # for rho = O(1) the condition is essentially kappa < u^(-1/3)
        kappa_edge = (1.0 / (3 * U_DOUBLE)) ** (1 / 3)
        assert csne_one_step(kappa_edge * 0.9, 1.0, U_DOUBLE)
        assert not csne_one_step(kappa_edge * 1.1, 1.0, U_DOUBLE)


class TestAugConditions:
    def test_x_examples(self):
        assert aug_x_convergence(1e6, 1e-7, U_SINGLE)      # 1e5 <= ~1.7e7
        assert not aug_x_convergence(1e8, 1.0, U_SINGLE)
        assert aug_x_convergence(1e12, 0.0, U_SINGLE)

    def test_r_examples(self):
        assert aug_r_convergence(1.0, U_SINGLE)
        assert aug_r_convergence(1e-7, U_SINGLE)           # 1e7 <= ~1.7e7
        assert not aug_r_convergence(1e-10, U_SINGLE)


class TestKappaAugmented:
    def test_unit_alpha_unit_sigma(self):
        got = kappa_augmented(1.0, 1.0, 1.0)
        assert got == pytest.approx((1 + math.sqrt(5)) / (math.sqrt(5) - 1), rel=1e-12)
        assert got == pytest.approx(2.618, rel=1e-3)

    def test_optimal_alpha_unit_sigma(self):
        got = kappa_augmented(1.0, 1.0, 2.0 ** -0.5)
        assert got == pytest.approx(2.0, rel=1e-12)

    def test_small_sigma_grows_quadratically(self):
        k1 = kappa_augmented(1.0, 1e-3, 1.0)
        k2 = kappa_augmented(1.0, 1e-4, 1.0)
        assert k2 / k1 == pytest.approx(100.0, rel=0.01)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            kappa_augmented(1.0, 0.0, 1.0)


class TestCostModel:
    @pytest.mark.parametrize("strategy,expected", [
        ("ls", (20000, 40100, True, False)),
        ("semi_normal", (39990, 210, True, True)),
        ("augmented", (40990, 80200, True, True)),
    ])
    def test_rows_at_paper_scale(self, strategy, expected):
        row = cost_model(1000, 10, strategy)
        assert row["flops_residual_precision"] == expected[0]
        assert row["flops_working_precision"] == expected[1]
        assert row["needs_Az"] == expected[2]
        assert row["needs_ATz"] == expected[3]

    def test_unknown_strategy(self):
        with pytest.raises(ValueError):
            cost_model(10, 2, "combined")


class TestMonotonicity:
    @given(st.floats(min_value=1.0, max_value=1e10),
           st.floats(min_value=0.0, max_value=1e3),
           st.floats(min_value=1.01, max_value=100.0))
    def test_ls_recognition_monotone(self, kappa, rho, factor):
        if not ls_recognition(kappa, rho):
            assert not ls_recognition(kappa * factor, rho)
            assert not ls_recognition(kappa, rho * factor)

    @given(st.floats(min_value=1.0, max_value=1e12),
           st.floats(min_value=1.01, max_value=100.0))
    def test_sn_convergence_monotone(self, kappa, factor):
        if not sn_convergence(kappa, U_SINGLE):
            assert not sn_convergence(kappa * factor, U_SINGLE)

    @given(st.floats(min_value=2.0, max_value=1e8),
           st.floats(min_value=0.0, max_value=1e3))
    def test_limiting_failure_implies_one_step_failure(self, kappa, rho):
        # with u_r = u^2 the one-step condition is the stricter one
        u = U_DOUBLE
        if not sn_limiting(kappa, rho, u, u * u):
            assert not csne_one_step(kappa, rho, u)


class TestConditionReport:
    def test_every_condition_present_once(self):
        rep = evaluate_conditions(1e3, 1e-2, 1.0, 1.0, DOUBLE_SINGLE)
        assert sorted(rep.entries) == sorted([
            "ls_recognition", "sn_recognition", "sn_convergence", "sn_limiting",
            "csne_one_step", "aug_x_convergence", "aug_r_convergence"])

    def test_rho_computed_from_norms(self):
        rep = evaluate_conditions(1e3, 2e-2, 2.0, 1.0, DOUBLE_SINGLE)
        assert rep.rho == pytest.approx(1e-2)

    def test_at_least_one_aug_condition_on_grid(self):
        # logged check: a counterexample is reported, not failed
        counterexamples = []
        for pair in (DOUBLE_SINGLE, EXTENDED_DOUBLE):
            for ki in range(8):
                for ri in range(8):
                    rep = evaluate_conditions(10.0 ** (ki + 1), 10.0 ** (-ri),
                                              1.0, 1.0, pair)
                    if not (rep.holds("aug_x_convergence") or
                            rep.holds("aug_r_convergence")):
                        counterexamples.append((pair.tag(), ki, ri))
        if counterexamples:
            warnings.warn(f"simplified-constant gap: neither saddle-point "
                          f"condition holds at {counterexamples}")
