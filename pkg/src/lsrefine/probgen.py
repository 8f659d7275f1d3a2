"""Test-problem generation with high-accuracy ground truth.

Matrices come from the randsvd construction (random orthogonal factors,
geometrically spaced singular values, spectral norm 1); right-hand sides get
a prescribed least-squares residual norm by adding a component scaled inside
the null space of A^T.  Ground truth x*, r* is recomputed from the rounded b
by a double-word refinement oracle, so it reflects the problem actually
handed to the refiners.

Randomness uses the counter-based Philox generator keyed through
SeedSequence, which makes every artifact a pure function of its seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .densela import apply_q, apply_qt, qr_factor, svd_of_r, tri_solve, solve_augmented_qr
from .precision import DwVector, FloatFormat

# Stream indices for the independent per-problem substreams.
STREAM_MATRIX = 0
STREAM_RHS = 1
STREAM_SKETCH = 2


class OracleDivergenceError(Exception):
    pass


def derive_seed(*parts: int) -> int:
    """Stable seed derivation for grid cells and substreams."""
    return int(np.random.SeedSequence(tuple(int(p) for p in parts)).generate_state(1, dtype=np.uint64)[0])


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


def gen_randsvd(m: int, n: int, kappa: float, seed: int) -> np.ndarray:
    """A = U diag(sigma) V^T with geometric sigma_i = kappa^(-(i-1)/(n-1))."""
    if m < n or n < 1:
        raise ValueError("need m >= n >= 1")
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    rng = _rng(seed)
    gu = rng.standard_normal((m, n))
    gv = rng.standard_normal((n, n))
    u, ru = np.linalg.qr(gu)
    u = u * np.where(np.diag(ru) < 0, -1.0, 1.0)
    v, rv = np.linalg.qr(gv)
    v = v * np.where(np.diag(rv) < 0, -1.0, 1.0)
    if n == 1:
        sigma = np.ones(1)
    else:
        sigma = kappa ** (-np.arange(n) / (n - 1.0))
    return (u * sigma) @ v.T


def truth_oracle(A, b, b_lo=None, max_iters: int = 40,
                 target: float = 1e-27) -> tuple[DwVector, DwVector]:
    """Least-squares ground truth by double-word refinement.

    A binary64 QR solve seeds x, then saddle-point corrections with
    double-word residuals refine (r, x) stored as double-word vectors.
    Nominal accuracy is far below every refinement tolerance in use; at
    extreme kappa * rho the noise floor scales like u_oracle * kappa^2 * rho.
    OracleDivergence signals a gross failure to refine (update norm stuck
    above 1e-8 relative).
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    m, n = A.shape
    if b_lo is None:
        b_lo = np.zeros_like(b)
    else:
        b_lo = np.ascontiguousarray(b_lo, dtype=np.float64)
    qr = qr_factor(A, FloatFormat.BINARY64)
    x0 = tri_solve(qr.r, apply_qt(qr, b)[:n])
    xh, xl = x0.copy(), np.zeros(n)
    rh, rl = _k.residual_dw(A, x0, b)
    rh, rl = _k.dw_add_dw_vec(rh, rl, b_lo, np.zeros(m))
    xnorm = float(np.linalg.norm(xh)) or 1.0
    prev = np.inf
    stalled = 0
    best = np.inf
    for i in range(max_iters):
        fh, fl, gh, gl = _k.saddle_dw(A, b, b_lo, rh, rl, xh, xl)
        sol = solve_augmented_qr(fh + fl, gh + gl, qr)
        xh, xl = _k.dw_add_fp_vec(xh, xl, sol.delta_x)
        rh, rl = _k.dw_add_fp_vec(rh, rl, sol.delta_r)
        xnorm = float(np.linalg.norm(xh)) or 1.0
        dxrel = float(np.linalg.norm(sol.delta_x)) / xnorm
        best = min(best, dxrel)
        if i >= 2:
            if dxrel <= target:
                break
            stalled = stalled + 1 if dxrel > 0.7 * prev else 0
            if stalled >= 2:
                break
        prev = dxrel
    if best > 1e-8:
        raise OracleDivergenceError(f"refinement stalled at relative update {best:.3e}")
    return DwVector(xh, xl), DwVector(rh, rl)


def gen_rhs(A, rnorm_target: float, seed: int):
    """Right-hand side with prescribed least-squares residual norm.

    b = A y + e at oracle precision, rounded to the binary64 master; e is a
    Gaussian vector projected onto null(A^T) and scaled to rnorm_target.
    Returns (b, x_star, r_star) with the truth recomputed from the rounded b.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    m, n = A.shape
    if rnorm_target < 0:
        raise ValueError("rnorm_target must be >= 0")
    rng = _rng(seed)
    y = rng.uniform(0.0, 1.0, size=n)
    y /= np.linalg.norm(y)
    if rnorm_target == 0:
        e = np.zeros(m)
    else:
        if m == n:
            raise ValueError("null space of A^T is trivial for m == n; "
                             "only rnorm_target = 0 is possible")
        w = rng.standard_normal(m)
        qr = qr_factor(A, FloatFormat.BINARY64)
        for _ in range(2):
            k = apply_qt(qr, w)
            k[:n] = 0.0
            w = apply_q(qr, k)
        e = w * (rnorm_target / np.linalg.norm(w))
    bh, bl = _k.matvec_dw(A, y, np.zeros(n))
    bh, bl = _k.dw_add_dw_vec(bh, bl, e, np.zeros(m))
    b = bh + bl
    x_star, r_star = truth_oracle(A, b)
    return b, x_star, r_star


@dataclass(frozen=True)
class LsProblem:
    """A least-squares instance with double-word ground truth.

    A and b are the residual-precision masters (binary64 storage); sigma
    holds the measured singular values of A.
    """

    a: np.ndarray
    b: np.ndarray
    x_star: DwVector
    r_star: DwVector
    kappa_target: float
    rnorm_target: float
    seed: int
    sigma: np.ndarray = field(repr=False, default=None)

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def n(self) -> int:
        return self.a.shape[1]

    @property
    def a_norm(self) -> float:
        return float(self.sigma[0])

    @property
    def kappa(self) -> float:
        return float(self.sigma[0] / self.sigma[-1])

    @property
    def x_norm(self) -> float:
        return self.x_star.norm()

    @property
    def r_norm(self) -> float:
        return self.r_star.norm()

    def rho(self) -> float:
        """||r*|| / (||A|| ||x*||), the residual-size parameter of the bounds."""
        return self.r_norm / (self.a_norm * self.x_norm)

    def x_relerr(self, x) -> float:
        """||x* - x|| / ||x*|| with the difference taken in double-word."""
        x64 = np.asarray(x, dtype=np.float64)
        dh, dl = _k.dw_sub_fp_vec(self.x_star.hi, self.x_star.lo, x64)
        return float(np.linalg.norm(dh + dl)) / self.x_norm

    def r_relerr(self, r) -> float:
        """||r* - r|| / ||r*||; returns inf for an exactly compatible system."""
        if isinstance(r, DwVector):
            dh, dl = _k.dw_sub_dw_vec(self.r_star.hi, self.r_star.lo, r.hi, r.lo)
        else:
            r64 = np.asarray(r, dtype=np.float64)
            dh, dl = _k.dw_sub_fp_vec(self.r_star.hi, self.r_star.lo, r64)
        denom = self.r_norm
        num = float(np.linalg.norm(dh + dl))
        if denom == 0.0:
            return np.inf if num > 0 else 0.0
        return num / denom


def generate(m: int, n: int, kappa: float, rnorm_target: float, seed: int) -> LsProblem:
    """Deterministic problem assembly from a single cell seed."""
    a = gen_randsvd(m, n, kappa, derive_seed(seed, STREAM_MATRIX))
    b, x_star, r_star = gen_rhs(a, rnorm_target, derive_seed(seed, STREAM_RHS))
    sigma = svd_of_r(qr_factor(a, FloatFormat.BINARY64).r)
    return LsProblem(a=a, b=b, x_star=x_star, r_star=r_star,
                     kappa_target=kappa, rnorm_target=rnorm_target,
                     seed=seed, sigma=sigma)
