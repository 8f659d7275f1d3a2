"""Iterative correction solvers and the randomized sketch preconditioner.

LSQR (Golub-Kahan bidiagonalization) handles the least-squares corrections,
optionally preconditioned on the right by the sketch R-factor, or on the
left for the underdetermined transpose solves.  GMRES with modified
Gram-Schmidt (one selective reorthogonalization pass, no restarting) handles
the split-preconditioned saddle-point corrections.  Vector arithmetic runs
in the working dtype; the short scalar recurrences use binary64.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .densela import RankDeficientError, qr_factor, tri_solve
from .precision import PrecisionPair
from .probgen import _rng, derive_seed


class Precondition(Enum):
    NONE = "none"
    SKETCH_RIGHT = "sketch_right"
    SKETCH_LEFT = "sketch_left"
    SKETCH_SPLIT_AUGMENTED = "sketch_split_augmented"


class Side(Enum):
    RIGHT = "right"
    LEFT = "left"


@dataclass(frozen=True)
class KrylovConfig:
    tol: float
    max_iters: int
    precondition: Precondition = Precondition.NONE
    record_iters: bool = True

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


def default_lsqr_config(p: PrecisionPair, n: int) -> KrylovConfig:
    """Tolerance 1e-14 (binary64) / 1e-7 (binary32), at most n iterations."""
    tol = 1e-14 if p.u < 1e-10 else 1e-7
    return KrylovConfig(tol=tol, max_iters=n, precondition=Precondition.SKETCH_RIGHT)


def default_gmres_config(p: PrecisionPair) -> KrylovConfig:
    """Tolerance 1e-12 (binary64) / 1e-6 (binary32), at most 50 iterations."""
    tol = 1e-12 if p.u < 1e-10 else 1e-6
    return KrylovConfig(tol=tol, max_iters=50,
                        precondition=Precondition.SKETCH_SPLIT_AUGMENTED)


@dataclass(frozen=True)
class SketchPreconditioner:
    """R-factor of the QR of the scaled Gaussian sketch of A."""

    r_s: np.ndarray
    sketch_rows: int


def build_sketch_preconditioner(A, seed: int, p: PrecisionPair,
                                max_attempts: int = 3) -> SketchPreconditioner:
    """Sketch with a (4n x m) scaled Gaussian and QR-factor the product at
    working precision; retries with a fresh draw on rank deficiency."""
    dtype = p.working_dtype
    A_w = np.asarray(A, dtype=dtype)
    m, n = A_w.shape
    s_rows = 4 * n
    if s_rows > m:
        warnings.warn(f"sketch has more rows ({s_rows}) than A ({m}); "
                      "preconditioner quality is not guaranteed", stacklevel=2)
    last_err = None
    for attempt in range(max_attempts):
        rng = _rng(derive_seed(seed, attempt))
        g = rng.standard_normal((s_rows, m))
        omega = (g / math.sqrt(s_rows)).astype(dtype)
        try:
            factors = qr_factor(omega @ A_w, p.working)
        except RankDeficientError as err:
            last_err = err
            continue
        if np.all(np.diag(factors.r) > 0):
            return SketchPreconditioner(r_s=factors.r, sketch_rows=s_rows)
        last_err = RankDeficientError("sketch produced a singular R factor")
    raise RankDeficientError(f"sketch rank-deficient after {max_attempts} attempts") from last_err


class _DenseOp:
    """Matvec/rmatvec wrapper holding a dense working-precision matrix."""

    def __init__(self, a):
        self.a = a
        self.shape = a.shape

    def matvec(self, v):
        return self.a @ v

    def rmatvec(self, u):
        return self.a.T @ u


def _as_op(op):
    return _DenseOp(op) if isinstance(op, np.ndarray) else op


class _RightPreconditioned:
    def __init__(self, op, r_s):
        self.op = op
        self.r_s = r_s
        self.shape = op.shape

    def matvec(self, v):
        return self.op.matvec(tri_solve(self.r_s, v))

    def rmatvec(self, u):
        return tri_solve(self.r_s, self.op.rmatvec(u), transposed=True)


class _LeftPreconditioned:
    def __init__(self, op, r_s):
        self.op = op
        self.r_s = r_s
        self.shape = op.shape

    def matvec(self, v):
        return tri_solve(self.r_s, self.op.matvec(v), transposed=True)

    def rmatvec(self, u):
        return self.op.rmatvec(tri_solve(self.r_s, u))


@dataclass
class LsqrResult:
    x: np.ndarray
    iters: int
    flag: str  # converged | max_iters | breakdown


def lsqr(op, b, config: KrylovConfig, precond: SketchPreconditioner | None = None,
         side: Side = Side.RIGHT, p: PrecisionPair | None = None) -> LsqrResult:
    """Least-squares solve min ||b - op z|| by Golub-Kahan bidiagonalization.

    Right preconditioning solves min ||b - (A R_s^-1) y|| and maps back
    x = R_s^-1 y; left preconditioning transforms the residual of a
    compatible (underdetermined transpose) system, leaving its minimum-norm
    solution unchanged.  Stopping follows the standard estimates: relative
    residual for compatible systems, ||op^T r|| / (||op|| ||r||) for
    incompatible ones, both against ``config.tol``.
    """
    base = _as_op(op)
    dtype = np.asarray(b).dtype.type if p is None else p.working_dtype
    b = np.asarray(b, dtype=dtype)
    work = base
    if precond is not None:
        if side is Side.RIGHT:
            work = _RightPreconditioned(base, precond.r_s)
        else:
            work = _LeftPreconditioned(base, precond.r_s)
            b = tri_solve(precond.r_s, b, transposed=True)
    ncols = work.shape[1]

    def unmap(z):
        if precond is not None and side is Side.RIGHT:
            return tri_solve(precond.r_s, z)
        return z

    x = np.zeros(ncols, dtype=dtype)
    u = b.copy()
    bnorm = float(np.linalg.norm(u))
    if bnorm == 0.0:
        return LsqrResult(unmap(x), 0, "converged")
    u /= dtype(bnorm)
    v = work.rmatvec(u)
    alpha = float(np.linalg.norm(v))
    if alpha == 0.0:
        return LsqrResult(unmap(x), 0, "breakdown")
    v /= dtype(alpha)
    w = v.copy()
    phibar = bnorm
    rhobar = alpha
    anorm2 = alpha * alpha
    flag = "max_iters"
    iters = config.max_iters
    for k in range(1, config.max_iters + 1):
        u = work.matvec(v) - dtype(alpha) * u
        beta = float(np.linalg.norm(u))
        if beta > 0:
            u /= dtype(beta)
        anorm2 += beta * beta
        rho = math.hypot(rhobar, beta)
        c = rhobar / rho
        s = beta / rho
        phi = c * phibar
        phibar = s * phibar
        x = x + dtype(phi / rho) * w
        if beta == 0.0:
            flag, iters = "breakdown", k
            break
        v = work.rmatvec(u) - dtype(beta) * v
        alpha = float(np.linalg.norm(v))
        if alpha == 0.0:
            flag, iters = "breakdown", k
            break
        v /= dtype(alpha)
        theta = s * alpha
        rhobar = -c * alpha
        w = v - dtype(theta / rho) * w
        anorm2 += alpha * alpha
        rnorm = phibar
        arnorm = phibar * alpha * abs(c)
        test_compat = rnorm / bnorm
        test_normal = arnorm / (math.sqrt(anorm2) * rnorm) if rnorm > 0 else 0.0
        if test_normal <= config.tol or test_compat <= config.tol:
            flag, iters = "converged", k
            break
    return LsqrResult(unmap(x), iters, flag)


@dataclass
class GmresResult:
    delta_r: np.ndarray
    delta_x: np.ndarray
    iters: int
    flag: str  # converged | no_convergence
    residual_history: list[float] = field(default_factory=list)


def gmres_augmented(a, f, g, alpha: float, config: KrylovConfig,
                    p: PrecisionPair, precond: SketchPreconditioner) -> GmresResult:
    """Split-preconditioned GMRES on the scaled saddle-point correction.

    Solves [[alpha I, A], [A^T, 0]] (w1; w2) = (f; g/alpha) through the
    operator diag(I, R_s^-T) . diag(I, R_s^-1) with unknown (w1, R_s w2),
    then returns delta_r = alpha w1, delta_x = w2, which solve the unscaled
    correction equation.  Stops when the preconditioned residual norm drops
    below tol times the preconditioned right-hand side norm.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    dtype = p.working_dtype
    A_w = np.asarray(a, dtype=dtype)
    m, n = A_w.shape
    r_s = precond.r_s
    f = np.asarray(f, dtype=dtype)
    g = np.asarray(g, dtype=dtype)
    alpha_w = dtype(alpha)

    def op(z):
        zr, zx = z[:m], z[m:]
        wx = tri_solve(r_s, zx)
        top = alpha_w * zr + A_w @ wx
        bot = tri_solve(r_s, A_w.T @ zr, transposed=True)
        return np.concatenate([top, bot])

    rhs = np.concatenate([f, tri_solve(r_s, g / alpha_w, transposed=True)])
    beta = float(np.linalg.norm(rhs))
    history: list[float] = []
    if beta == 0.0:
        return GmresResult(np.zeros(m, dtype=dtype), np.zeros(n, dtype=dtype),
                           0, "converged", history)
    dim = m + n
    max_k = config.max_iters
    V = np.zeros((dim, max_k + 1), dtype=dtype)
    H = np.zeros((max_k + 1, max_k))
    cs = np.zeros(max_k)
    sn = np.zeros(max_k)
    gvec = np.zeros(max_k + 1)
    gvec[0] = beta
    V[:, 0] = rhs / dtype(beta)
    flag = "no_convergence"
    k_used = max_k
    for j in range(max_k):
        w = op(V[:, j])
        norm_before = float(np.linalg.norm(w))
        for i in range(j + 1):
            hij = float(V[:, i] @ w)
            H[i, j] = hij
            w = w - dtype(hij) * V[:, i]
        norm_after = float(np.linalg.norm(w))
        if norm_after < 0.70710678 * norm_before:
            # selective reorthogonalization against the whole basis
            for i in range(j + 1):
                corr = float(V[:, i] @ w)
                H[i, j] += corr
                w = w - dtype(corr) * V[:, i]
            norm_after = float(np.linalg.norm(w))
        H[j + 1, j] = norm_after
        if norm_after > 0 and j + 1 <= max_k:
            V[:, j + 1] = w / dtype(norm_after)
        # apply accumulated Givens rotations to the new column
        for i in range(j):
            t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
            H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
            H[i, j] = t
        denom = math.hypot(H[j, j], H[j + 1, j])
        cs[j] = H[j, j] / denom if denom else 1.0
        sn[j] = H[j + 1, j] / denom if denom else 0.0
        H[j, j] = denom
        H[j + 1, j] = 0.0
        gvec[j + 1] = -sn[j] * gvec[j]
        gvec[j] = cs[j] * gvec[j]
        resid = abs(gvec[j + 1])
        if config.record_iters:
            history.append(resid)
        if resid <= config.tol * beta:
            flag, k_used = "converged", j + 1
            break
        if H[j + 1, j] == 0.0 and norm_after == 0.0:
            flag, k_used = "converged", j + 1
            break
    else:
        k_used = max_k
    y = np.zeros(k_used)
    for i in range(k_used - 1, -1, -1):
        y[i] = (gvec[i] - H[i, i + 1:k_used] @ y[i + 1:k_used]) / H[i, i]
    z = V[:, :k_used] @ y.astype(dtype)
    delta_r = alpha_w * z[:m]
    delta_x = tri_solve(r_s, z[m:])
    return GmresResult(delta_r, delta_x, k_used, flag, history)
