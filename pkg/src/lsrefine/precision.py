"""Two-level floating-point configuration and high-accuracy residual arithmetic.

A :class:`PrecisionPair` names the working format (factorizations, solves,
solution updates) and the residual format (evaluation of ``b - A x`` and
``A^T r``).  binary32 and binary64 map to native numpy dtypes; the extended
format is emulated by double-word arithmetic (an unevaluated pair of
binary64 values combined with error-free transformations).  The reported
unit roundoff of the extended tag is the quad-precision value 2**-113 that
the convergence predicates assume; the emulation itself carries roughly
2**-106 worth of accuracy, which is what the soft acceptance gate at
kappa = 1e7 accounts for.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels as _k


class FloatFormat(Enum):
    BINARY32 = "binary32"
    BINARY64 = "binary64"
    EXTENDED = "extended"


_UNIT_ROUNDOFF = {
    FloatFormat.BINARY32: 2.0 ** -24,
    FloatFormat.BINARY64: 2.0 ** -53,
    FloatFormat.EXTENDED: 2.0 ** -113,
}

# Effective roundoff of the double-word emulation backing EXTENDED.
EXTENDED_EMULATION_ROUNDOFF = 2.0 ** -106

_WORKING_DTYPES = {
    FloatFormat.BINARY32: np.float32,
    FloatFormat.BINARY64: np.float64,
}


@dataclass(frozen=True)
class PrecisionPair:
    """Working/residual format pair; requires u_r <= u."""

    working: FloatFormat
    residual: FloatFormat

    def __post_init__(self):
        if self.working not in _WORKING_DTYPES:
            raise ValueError(f"unsupported working format: {self.working}")
        if self.residual not in (FloatFormat.BINARY64, FloatFormat.EXTENDED):
            raise ValueError(f"unsupported residual format: {self.residual}")
        if self.u_r > self.u:
            raise ValueError("residual precision must be at least as fine as working")

    @property
    def u(self) -> float:
        return _UNIT_ROUNDOFF[self.working]

    @property
    def u_r(self) -> float:
        return _UNIT_ROUNDOFF[self.residual]

    @property
    def working_dtype(self):
        return _WORKING_DTYPES[self.working]

    def supports_squared_gap(self) -> bool:
        """True when u_r <= u**2 (precondition of the non-combined refiners)."""
        return self.u_r <= self.u ** 2

    def tag(self) -> str:
        return f"{self.residual.value}_{self.working.value}"


DOUBLE_SINGLE = PrecisionPair(working=FloatFormat.BINARY32, residual=FloatFormat.BINARY64)
EXTENDED_DOUBLE = PrecisionPair(working=FloatFormat.BINARY64, residual=FloatFormat.EXTENDED)
DOUBLE_DOUBLE = PrecisionPair(working=FloatFormat.BINARY64, residual=FloatFormat.BINARY64)

PAIR_NAMES = {
    "binary64:binary32": DOUBLE_SINGLE,
    "extended:binary64": EXTENDED_DOUBLE,
    "binary64:binary64": DOUBLE_DOUBLE,
}


@dataclass(frozen=True)
class ExtendedScalar:
    """Unevaluated sum hi + lo of two binary64 values, |lo| <= ulp(hi)/2."""

    hi: float
    lo: float

    def value(self) -> float:
        return self.hi + self.lo

    def __float__(self) -> float:
        return self.value()


class DwVector:
    """Vector of unevaluated binary64 pairs; the extended-format container."""

    __slots__ = ("hi", "lo")

    def __init__(self, hi: np.ndarray, lo: np.ndarray | None = None):
        hi = np.asarray(hi, dtype=np.float64)
        if lo is None:
            lo = np.zeros_like(hi)
        else:
            lo = np.asarray(lo, dtype=np.float64)
        if hi.shape != lo.shape:
            raise ValueError("hi/lo shape mismatch")
        self.hi = hi
        self.lo = lo

    def __len__(self) -> int:
        return self.hi.shape[0]

    def to_f64(self) -> np.ndarray:
        # IEEE addition rounds hi + lo correctly, so this is the rounded value.
        return self.hi + self.lo

    def norm(self) -> float:
        return float(np.linalg.norm(self.to_f64()))


def round_to_working(v, p: PrecisionPair) -> np.ndarray:
    """Correctly round a residual-precision vector to the working format."""
    if isinstance(v, DwVector):
        v = v.to_f64()
    arr = np.asarray(v)
    return arr.astype(p.working_dtype)


def _master64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def residual_matvec(A, x, b, p: PrecisionPair):
    """r = b - A x evaluated at residual precision.

    A and b are residual-precision masters (binary64 storage); x is a
    working-precision vector and is promoted exactly.  Returns a binary64
    array or a DwVector depending on ``p.residual``.
    """
    A = _master64(A)
    x = _master64(x)
    b = _master64(b)
    m, n = A.shape
    if x.shape[0] != n or b.shape[0] != m:
        raise ValueError("dimension mismatch in residual_matvec")
    if p.residual is FloatFormat.BINARY64:
        return _k.residual_f64(A, x, b)
    rh, rl = _k.residual_dw(A, x, b)
    return DwVector(rh, rl)


def transpose_residual_matvec(A, r, p: PrecisionPair):
    """t = A^T r evaluated at residual precision (r may be a DwVector)."""
    A = _master64(A)
    if isinstance(r, DwVector):
        if len(r) != A.shape[0]:
            raise ValueError("dimension mismatch in transpose_residual_matvec")
        if p.residual is FloatFormat.EXTENDED:
            th, tl = _k.atr_dw(A, r.hi, r.lo)
            return DwVector(th, tl)
        return _k.atr_f64(A, r.to_f64())
    r = _master64(r)
    if r.shape[0] != A.shape[0]:
        raise ValueError("dimension mismatch in transpose_residual_matvec")
    if p.residual is FloatFormat.EXTENDED:
        th, tl = _k.atr_dw(A, r, np.zeros_like(r))
        return DwVector(th, tl)
    return _k.atr_f64(A, r)


def saddle_residuals(A, b, r, x, p: PrecisionPair):
    """f = b - r - A x and g = -A^T r at residual precision.

    r and x are working-precision iterates (promoted exactly); the result is
    a pair of binary64 arrays or DwVectors.
    """
    A = _master64(A)
    b = _master64(b)
    r = _master64(r)
    x = _master64(x)
    if r.shape[0] != A.shape[0] or x.shape[0] != A.shape[1] or b.shape[0] != A.shape[0]:
        raise ValueError("dimension mismatch in saddle_residuals")
    if p.residual is FloatFormat.BINARY64:
        f, g = _k.saddle_f64(A, b, r, x)
        return f, g
    zeros_m = np.zeros_like(b)
    fh, fl, gh, gl = _k.saddle_dw(A, b, zeros_m, r, np.zeros_like(r), x, np.zeros_like(x))
    return DwVector(fh, fl), DwVector(gh, gl)


def compensated_dot(a, b) -> ExtendedScalar:
    """Dot product with double-word accumulation; exact to O(u_r^2 * cond)."""
    a = _master64(a)
    b = _master64(b)
    if a.shape != b.shape:
        raise ValueError("length mismatch in compensated_dot")
    hi, lo = _k.dot2(a, b)
    return ExtendedScalar(hi, lo)
