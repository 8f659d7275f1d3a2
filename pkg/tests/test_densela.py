import numpy as np
import pytest

from lsrefine.densela import (NoConvergenceError, RankDeficientError,
                              SingularTriangularError, apply_q, apply_qt,
                              materialize_q1, qr_factor, solve_augmented_qr,
                              svd_of_r, tri_solve)
from lsrefine.precision import FloatFormat

F32 = FloatFormat.BINARY32
F64 = FloatFormat.BINARY64


def reconstruct(f):
    """Q [R; 0] column by column from the stored reflectors."""
    m, n = f.m, f.n
    out = np.zeros((m, n), dtype=f.r.dtype)
    for k in range(n):
        col = np.zeros(m, dtype=f.r.dtype)
        col[:n] = f.r[:, k]
        out[:, k] = apply_q(f, col)
    return out


class TestQrFactor:
    def test_identity(self):
        f = qr_factor(np.eye(2), F64)
        assert np.allclose(f.r, np.eye(2))

    def test_single_column_norm(self):
        # column (3, 4): R must be +5 under the nonnegative-diagonal convention
        f = qr_factor(np.array([[3.0], [4.0]]), F64)
        assert f.r[0, 0] == pytest.approx(5.0, rel=1e-15)

    def test_reconstruction_bound_binary64(self):
        rng = np.random.Generator(np.random.Philox(key=1))
        A = rng.standard_normal((100, 10))
        f = qr_factor(A, F64)
        err = np.linalg.norm(reconstruct(f) - A)
        u = 2.0 ** -53
        assert err <= 10 * 100 * 10 * u * np.linalg.norm(A)

    def test_nonnegative_diagonal(self):
        rng = np.random.Generator(np.random.Philox(key=2))
        for _ in range(5):
            f = qr_factor(rng.standard_normal((20, 6)), F64)
            assert np.all(np.diag(f.r) >= 0)

    def test_rank_deficient_raises(self):
        A = np.zeros((4, 2))
        A[:, 0] = [1, 2, 3, 4]
        with pytest.raises(RankDeficientError):
            qr_factor(A, F64)

    def test_requires_tall_matrix(self):
        with pytest.raises(ValueError):
            qr_factor(np.ones((2, 3)), F64)


class TestApplyQ:
    def test_identity_factors_leave_vector(self):
        f = qr_factor(np.eye(3), F64)
        v = np.array([1.0, -2.0, 3.0])
        assert np.allclose(apply_qt(f, v), v)

    def test_maps_factored_column_to_norm(self):
        f = qr_factor(np.array([[3.0], [4.0]]), F64)
        out = apply_qt(f, np.array([3.0, 4.0]))
        assert np.allclose(out, [5.0, 0.0], atol=1e-14)

    def test_norm_preservation(self):
        rng = np.random.Generator(np.random.Philox(key=3))
        A = rng.standard_normal((30, 5))
        f = qr_factor(A, F64)
        v = rng.standard_normal(30)
        assert np.linalg.norm(apply_qt(f, v)) == pytest.approx(
            np.linalg.norm(v), rel=1e-13)

    def test_qt_q_round_trip(self):
        rng = np.random.Generator(np.random.Philox(key=4))
        A = rng.standard_normal((40, 8))
        f = qr_factor(A, F64)
        v = rng.standard_normal(40)
        back = apply_qt(f, apply_q(f, v))
        assert np.linalg.norm(back - v) <= 10 * 40 * 2.0 ** -53 * np.linalg.norm(v)

    def test_materialize_q1_orthonormal(self):
        rng = np.random.Generator(np.random.Philox(key=5))
        f = qr_factor(rng.standard_normal((25, 4)), F64)
        q1 = materialize_q1(f)
        assert np.allclose(q1.T @ q1, np.eye(4), atol=1e-14)


class TestTriSolve:
    def test_identity(self):
        y = np.array([3.0, -1.0])
        assert np.array_equal(tri_solve(np.eye(2), y), y)

    def test_back_substitution_example(self):
        R = np.array([[2.0, 1.0], [0.0, 2.0]])
        x = tri_solve(R, np.array([4.0, 2.0]))
        assert np.allclose(x, [1.5, 1.0])
        assert np.allclose(R @ x, [4.0, 2.0])

    def test_forward_substitution_example(self):
        R = np.array([[2.0, 1.0], [0.0, 2.0]])
        x = tri_solve(R, np.array([2.0, 4.0]), transposed=True)
        assert np.allclose(x, [1.0, 1.5])
        assert np.allclose(R.T @ x, [2.0, 4.0])

    def test_residual_bound(self):
        rng = np.random.Generator(np.random.Philox(key=6))
        for _ in range(10):
            n = 10
            R = np.triu(rng.standard_normal((n, n))) + 3 * np.eye(n)
            y = rng.standard_normal(n)
            x = tri_solve(R, y)
            res = np.linalg.norm(R @ x - y)
            assert res <= 2 * n * 2.0 ** -53 * np.linalg.norm(R) * np.linalg.norm(x)

    def test_singular_raises(self):
        R = np.array([[1.0, 2.0], [0.0, 0.0]])
        with pytest.raises(SingularTriangularError):
            tri_solve(R, np.ones(2))


class TestSolveAugmentedQr:
    def test_homogeneous(self):
        rng = np.random.Generator(np.random.Philox(key=7))
        A = rng.standard_normal((10, 3))
        f = qr_factor(A, F64)
        sol = solve_augmented_qr(np.zeros(10), np.zeros(3), f)
        assert np.all(sol.delta_r == 0)
        assert np.all(sol.delta_x == 0)

    def _dense_oracle(self, A, f, g):
        m, n = A.shape
        T = np.zeros((m + n, m + n))
        T[:m, :m] = np.eye(m)
        T[:m, m:] = A
        T[m:, :m] = A.T
        sol = np.linalg.solve(T, np.concatenate([f, g]))
        return sol[:m], sol[m:]

    def test_square_case_matches_dense_lu(self):
        rng = np.random.Generator(np.random.Philox(key=8))
        A = np.eye(4) + 0.1 * rng.standard_normal((4, 4))
        fac = qr_factor(A, F64)
        f = rng.standard_normal(4)
        g = rng.standard_normal(4)
        sol = solve_augmented_qr(f, g, fac)
        dr, dx = self._dense_oracle(A, f, g)
        assert np.allclose(sol.delta_r, dr, atol=1e-12)
        assert np.allclose(sol.delta_x, dx, atol=1e-12)

    def test_rectangular_matches_dense_lu(self):
        rng = np.random.Generator(np.random.Philox(key=9))
        A = rng.standard_normal((30, 4))  # well conditioned w.h.p.
        fac = qr_factor(A, F64)
        f = rng.standard_normal(30)
        g = rng.standard_normal(4)
        sol = solve_augmented_qr(f, g, fac)
        dr, dx = self._dense_oracle(A, f, g)
        scale = np.linalg.norm(np.concatenate([dr, dx]))
        assert np.linalg.norm(sol.delta_r - dr) <= 1e-10 * scale
        assert np.linalg.norm(sol.delta_x - dx) <= 1e-10 * scale


class TestSvdOfR:
    def test_diagonal(self):
        assert np.allclose(svd_of_r(np.diag([3.0, 1.0])), [3.0, 1.0])

    def test_golden_ratio_pair(self):
        sev = svd_of_r(np.array([[1.0, 1.0], [0.0, 1.0]]))
        phi = (1 + np.sqrt(5)) / 2
        assert sev[0] == pytest.approx(phi, rel=1e-14)
        assert sev[1] == pytest.approx(1 / phi, rel=1e-14)

    def test_prescribed_condition_number(self):
        from lsrefine.probgen import gen_randsvd
        A = gen_randsvd(1000, 10, 1e4, seed=11)
        sev = svd_of_r(qr_factor(A, F64).r)
        assert sev[0] / sev[-1] == pytest.approx(1e4, rel=0.01)
        # geometric spacing of the whole spectrum
        ratios = sev[:-1] / sev[1:]
        assert np.allclose(ratios, ratios[0], rtol=0.01)

    def test_budget_exhaustion_raises(self):
        rng = np.random.Generator(np.random.Philox(key=12))
        R = np.triu(rng.standard_normal((8, 8)))
        with pytest.raises(NoConvergenceError):
            svd_of_r(R, max_sweeps=1, tol=1e-300)


class TestPrecisionParametric:
    def test_float32_stays_float32(self):
        rng = np.random.Generator(np.random.Philox(key=13))
        A = rng.standard_normal((15, 4)).astype(np.float32)
        f = qr_factor(A, F32)
        assert f.r.dtype == np.float32
        assert apply_qt(f, rng.standard_normal(15).astype(np.float32)).dtype == np.float32
        x = tri_solve(f.r, np.ones(4, dtype=np.float32))
        assert x.dtype == np.float32
