"""Dense kernels in a caller-chosen precision.

Householder QR with the orthogonal factor kept in reflector form, triangular
solves, the QR-based saddle-point solve, and a one-sided Jacobi SVD for small
triangular matrices.  Every kernel runs entirely in the requested format
(binary32 or binary64); the refiners instantiate them at working precision
and the tests at binary64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .precision import FloatFormat


class RankDeficientError(Exception):
    pass


class SingularTriangularError(Exception):
    pass


class NoConvergenceError(Exception):
    pass


_DTYPES = {
    FloatFormat.BINARY32: np.float32,
    FloatFormat.BINARY64: np.float64,
}


def _dtype_of(precision):
    if isinstance(precision, FloatFormat):
        return _DTYPES[precision]
    return np.dtype(precision).type


def _format_of(precision) -> FloatFormat:
    if isinstance(precision, FloatFormat):
        return precision
    if np.dtype(precision) == np.float32:
        return FloatFormat.BINARY32
    if np.dtype(precision) == np.float64:
        return FloatFormat.BINARY64
    raise ValueError(f"unsupported precision: {precision!r}")


@dataclass(frozen=True)
class QrFactors:
    """Householder factorization A = Q [R; 0].

    Q lives in factored form: column j of ``reflectors`` holds the unit
    reflector (leading entry 1 at row j) with coefficient ``coefs[j]``, and
    ``signs`` absorbs the row flips that give R a nonnegative diagonal.
    """

    reflectors: np.ndarray
    coefs: np.ndarray
    signs: np.ndarray
    r: np.ndarray
    precision: FloatFormat

    @property
    def m(self) -> int:
        return self.reflectors.shape[0]

    @property
    def n(self) -> int:
        return self.reflectors.shape[1]


@dataclass(frozen=True)
class AugmentedSolveResult:
    delta_r: np.ndarray
    delta_x: np.ndarray


def qr_factor(A, precision) -> QrFactors:
    """Householder QR with nonnegative diagonal; all arithmetic in ``precision``."""
    dtype = _dtype_of(precision)
    W = np.array(A, dtype=dtype)
    m, n = W.shape
    if m < n:
        raise ValueError("qr_factor requires m >= n")
    refl = np.zeros((m, n), dtype=dtype)
    coefs = np.zeros(n, dtype=dtype)
    for j in range(n):
        x = W[j:, j]
        normx = np.sqrt(x @ x)
        if normx == 0:
            raise RankDeficientError(f"column {j} reduced to zero")
        beta = -np.copysign(normx, x[0])
        v0 = x[0] - beta
        w = x / v0
        w[0] = dtype(1)
        tau = dtype(2) / (w @ w)
        if n - j > 1:
            proj = w @ W[j:, j + 1:]
            W[j:, j + 1:] -= tau * np.outer(w, proj)
        W[j, j] = beta
        W[j + 1:, j] = 0
        refl[j:, j] = w
        coefs[j] = tau
    r = np.triu(W[:n, :n]).copy()
    signs = np.where(np.diag(r) < 0, dtype(-1), dtype(1))
    r *= signs[:, None]
    return QrFactors(reflectors=refl, coefs=coefs, signs=signs, r=r,
                     precision=_format_of(precision))


def apply_qt(f: QrFactors, v) -> np.ndarray:
    """Q^T v via sequential reflector application; row slices [:n] and [n:]
    are the k1/k2 partition of the result."""
    dtype = f.reflectors.dtype
    out = np.array(v, dtype=dtype)
    if out.shape[0] != f.m:
        raise ValueError("dimension mismatch in apply_qt")
    for j in range(f.n):
        w = f.reflectors[j:, j]
        s = f.coefs[j] * (w @ out[j:])
        out[j:] -= s * w
    out[: f.n] *= f.signs
    return out


def apply_q(f: QrFactors, v) -> np.ndarray:
    """Q v (reflectors in reverse order)."""
    dtype = f.reflectors.dtype
    out = np.array(v, dtype=dtype)
    if out.shape[0] != f.m:
        raise ValueError("dimension mismatch in apply_q")
    out[: f.n] *= f.signs
    for j in range(f.n - 1, -1, -1):
        w = f.reflectors[j:, j]
        s = f.coefs[j] * (w @ out[j:])
        out[j:] -= s * w
    return out


def materialize_q1(f: QrFactors) -> np.ndarray:
    """Explicit m x n orthonormal factor (used for initial-solution solves)."""
    dtype = f.reflectors.dtype
    q1 = np.zeros((f.m, f.n), dtype=dtype)
    for k in range(f.n):
        e = np.zeros(f.m, dtype=dtype)
        e[k] = 1
        q1[:, k] = apply_q(f, e)
    return q1


def tri_solve(R, y, transposed: bool = False, precision=None) -> np.ndarray:
    """Solve R x = y (or R^T x = y) by substitution in the given precision."""
    dtype = _dtype_of(precision) if precision is not None else np.asarray(R).dtype.type
    R = np.asarray(R, dtype=dtype)
    x = np.array(y, dtype=dtype)
    n = R.shape[0]
    if R.shape[1] != n or x.shape[0] != n:
        raise ValueError("dimension mismatch in tri_solve")
    diag = np.diag(R)
    if np.any(diag == 0):
        raise SingularTriangularError("zero diagonal entry")
    if transposed:
        for i in range(n):
            x[i] = (x[i] - R[:i, i] @ x[:i]) / R[i, i]
    else:
        for i in range(n - 1, -1, -1):
            x[i] = (x[i] - R[i, i + 1:] @ x[i + 1:]) / R[i, i]
    return x


def solve_augmented_qr(f, g, qr: QrFactors, precision=None) -> AugmentedSolveResult:
    """Saddle-point correction via the stored QR factors.

    Four steps, all in the factor precision: h = R^-T g, k = Q^T f,
    delta_r = Q [h; k2], delta_x = R^-1 (k1 - h).
    """
    n = qr.n
    h = tri_solve(qr.r, g, transposed=True, precision=precision)
    k = apply_qt(qr, f)
    stacked = np.concatenate([h, k[n:]])
    delta_r = apply_q(qr, stacked)
    delta_x = tri_solve(qr.r, k[:n] - h, precision=precision)
    return AugmentedSolveResult(delta_r=delta_r, delta_x=delta_x)


def svd_of_r(R, max_sweeps: int = 30, tol: float | None = None) -> np.ndarray:
    """Singular values of a small matrix by one-sided Jacobi, descending.

    Works on the columns in binary64; high relative accuracy for the small
    singular values, which feed the condition estimates and the scaling
    formula.
    """
    B = np.array(R, dtype=np.float64)
    n = B.shape[1]
    if tol is None:
        tol = 32 * np.finfo(np.float64).eps
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                cp = B[:, p]
                cq = B[:, q]
                app = cp @ cp
                aqq = cq @ cq
                if app == 0.0 or aqq == 0.0:
                    continue
                apq = cp @ cq
                rel = abs(apq) / np.sqrt(app * aqq)
                off = max(off, rel)
                if rel <= tol:
                    continue
                zeta = (aqq - app) / (2.0 * apq)
                sgn = 1.0 if zeta >= 0 else -1.0
                t = sgn / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                new_p = c * cp - s * cq
                new_q = s * cp + c * cq
                B[:, p] = new_p
                B[:, q] = new_q
        if off <= tol:
            sigma = np.sqrt(np.sum(B * B, axis=0))
            sigma.sort()
            return sigma[::-1].copy()
    raise NoConvergenceError(f"Jacobi sweep budget of {max_sweeps} exhausted")
