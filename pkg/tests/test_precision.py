import numpy as np
import pytest
from hypothesis import given, strategies as st

from lsrefine.precision import (DOUBLE_DOUBLE, DOUBLE_SINGLE, EXTENDED_DOUBLE,
                                DwVector, FloatFormat, PrecisionPair,
                                compensated_dot, residual_matvec,
                                round_to_working, transpose_residual_matvec)

from oracles import frac_dot, frac_residual

# magnitudes stay inside the double-word domain: products must not underflow
# for the error-free transforms to be exact
finite_entry = st.one_of(st.just(0.0),
                         st.floats(min_value=1e-100, max_value=1e8),
                         st.floats(min_value=-1e8, max_value=-1e-100))


class TestPrecisionPair:
    def test_paper_unit_roundoffs(self):
        # the pairs carry the (approximate) unit roundoffs reported for the
        # IEEE formats: 6.0e-8, 1.1e-16, 9.6e-35
        assert DOUBLE_SINGLE.u == pytest.approx(6.0e-8, rel=0.01)
        assert DOUBLE_SINGLE.u_r == pytest.approx(1.1e-16, rel=0.01)
        assert EXTENDED_DOUBLE.u == pytest.approx(1.1e-16, rel=0.01)
        assert EXTENDED_DOUBLE.u_r == pytest.approx(9.6e-35, rel=0.01)

    def test_squared_gap(self):
        assert DOUBLE_SINGLE.supports_squared_gap()
        assert EXTENDED_DOUBLE.supports_squared_gap()
        assert not DOUBLE_DOUBLE.supports_squared_gap()

    def test_invalid_pairs_rejected(self):
        with pytest.raises(ValueError):
            PrecisionPair(working=FloatFormat.EXTENDED, residual=FloatFormat.EXTENDED)
        with pytest.raises(ValueError):
            PrecisionPair(working=FloatFormat.BINARY64, residual=FloatFormat.BINARY32)


class TestRoundToWorking:
    def test_exact_value_unchanged(self):
        out = round_to_working(np.array([1.0]), DOUBLE_SINGLE)
        assert out.dtype == np.float32
        assert out[0] == np.float32(1.0)

    def test_below_ulp_rounds_to_nearest_even(self):
        out = round_to_working(np.array([1.0 + 2.0 ** -30]), DOUBLE_SINGLE)
        assert out[0] == np.float32(1.0)

    def test_tenth_matches_decimal_conversion(self):
        # independent oracle: numpy's decimal-string-to-binary32 conversion
        ours = round_to_working(np.array([0.1]), DOUBLE_SINGLE)[0]
        direct = np.float32("0.1")
        assert ours.tobytes() == direct.tobytes()
        assert int.from_bytes(ours.tobytes(), "little") == 0x3DCCCCCD

    @given(st.lists(st.floats(min_value=-1e30, max_value=1e30,
                              allow_nan=False), min_size=1, max_size=20))
    def test_idempotent(self, values):
        v = np.array(values)
        once = round_to_working(v, DOUBLE_SINGLE)
        twice = round_to_working(once, DOUBLE_SINGLE)
        assert np.array_equal(once, twice)

    @given(st.lists(st.floats(width=32, allow_nan=False, allow_infinity=False),
                    min_size=1, max_size=20))
    def test_round_trip_identity_for_representable(self, values):
        v = np.array(values, dtype=np.float32)
        promoted = v.astype(np.float64)  # exact embedding
        back = round_to_working(promoted, DOUBLE_SINGLE)
        assert np.array_equal(back, v)

    def test_dw_vector_rounding(self):
        dw = DwVector(np.array([1.0]), np.array([1e-20]))
        assert round_to_working(dw, EXTENDED_DOUBLE)[0] == 1.0


class TestResidualMatvec:
    def test_identity_zero_solution(self):
        A = np.eye(3)
        r = residual_matvec(A, np.zeros(3), np.array([1.0, 2.0, 3.0]), DOUBLE_SINGLE)
        assert np.array_equal(r, [1.0, 2.0, 3.0])

    def test_exact_cancellation(self):
        A = np.array([[1.0], [1.0]])
        r = residual_matvec(A, np.array([1.0]), np.array([1.0, 1.0]), DOUBLE_SINGLE)
        assert np.array_equal(r, [0.0, 0.0])

    def test_extended_matches_rational_oracle(self):
        rng = np.random.Generator(np.random.Philox(key=123))
        A = rng.uniform(0.5, 1.5, size=(20, 5))
        x = rng.uniform(0.5, 1.5, size=5)
        # keep each row sum well away from zero so relative error is meaningful
        b = A @ x + 0.5
        r = residual_matvec(A, x, b, EXTENDED_DOUBLE)
        exact = frac_residual(A, x, b)
        for i in range(20):
            got = frac_dot([r.hi[i]], [1.0]) + frac_dot([r.lo[i]], [1.0])
            err = abs(got - exact[i]) / abs(exact[i])
            assert err <= 2.0 ** -100

    def test_binary64_residual_reduces_to_working_eval(self):
        rng = np.random.Generator(np.random.Philox(key=5))
        A = rng.standard_normal((7, 3))
        x = rng.standard_normal(3)
        b = rng.standard_normal(7)
        r = residual_matvec(A, x, b, DOUBLE_DOUBLE)
        # same summation order, plain binary64
        ref = np.empty(7)
        for i in range(7):
            acc = 0.0
            for j in range(3):
                acc += A[i, j] * x[j]
            ref[i] = b[i] - acc
        assert np.array_equal(r, ref)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            residual_matvec(np.eye(3), np.zeros(2), np.zeros(3), DOUBLE_SINGLE)


class TestCompensatedDot:
    def test_unit_vectors(self):
        e1 = np.array([1.0, 0.0])
        d = compensated_dot(e1, e1)
        assert (d.hi, d.lo) == (1.0, 0.0)

    def test_two_term_error_free(self):
        d = compensated_dot(np.array([1.0, 1e-20]), np.array([1.0, 1.0]))
        assert d.hi == 1.0
        assert d.lo == 1e-20

    def test_cancellation_matches_rational_oracle(self):
        rng = np.random.Generator(np.random.Philox(key=99))
        a = rng.standard_normal(100) * np.logspace(0, 8, 100)
        b = rng.standard_normal(100)
        d = compensated_dot(a, b)
        exact = frac_dot(a, b)
        got = frac_dot([d.hi], [1.0]) + frac_dot([d.lo], [1.0])
        assert abs(got - exact) <= abs(exact) * 2.0 ** -100

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            compensated_dot(np.zeros(3), np.zeros(4))

    @given(st.lists(finite_entry, min_size=1, max_size=8).flatmap(
        lambda a: st.tuples(st.just(a), st.lists(
            finite_entry, min_size=len(a), max_size=len(a)))))
    def test_short_dot_products_near_exact(self, ab):
        a, b = np.array(ab[0]), np.array(ab[1])
        d = compensated_dot(a, b)
        exact = frac_dot(a, b)
        got = frac_dot([d.hi], [1.0]) + frac_dot([d.lo], [1.0])
        spread = sum(abs(frac_dot([x], [y])) for x, y in zip(a, b))
        assert abs(got - exact) <= spread * 2.0 ** -100


class TestTransposeResidualMatvec:
    def test_extended_input_and_output(self):
        rng = np.random.Generator(np.random.Philox(key=17))
        A = rng.standard_normal((12, 4))
        r = rng.standard_normal(12)
        t64 = transpose_residual_matvec(A, r, DOUBLE_SINGLE)
        t_dw = transpose_residual_matvec(A, r, EXTENDED_DOUBLE)
        # they differ by the binary64 path's own rounding, ~u * sum |terms|
        assert np.allclose(t64, t_dw.to_f64(), rtol=1e-13, atol=1e-15)
        # exactness against the rational oracle
        for j in range(4):
            exact = frac_dot(A[:, j], r)
            got = frac_dot([t_dw.hi[j]], [1.0]) + frac_dot([t_dw.lo[j]], [1.0])
            assert abs(got - exact) <= max(abs(exact), 1e-30) * 2.0 ** -90
