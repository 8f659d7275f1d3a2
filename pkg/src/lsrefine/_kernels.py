"""Sequential residual-precision kernels with a fixed summation order.

Everything evaluated at residual precision funnels through here: plain
binary64 paths and double-word (pair of binary64) paths built on error-free
transformations.  Row sums accumulate strictly left to right so repeated
runs are bitwise identical.  fastmath stays off; the error-free transforms
rely on exact IEEE semantics.

As with every double-word library, the transforms are exact only while no
intermediate product underflows or overflows (|a*b| comfortably inside the
normal binary64 range); the toolkit's unit-spectral-norm problems stay far
inside that domain.
"""

import numba
import numpy as np

# Dekker splitting constant for binary64, 2**27 + 1.
_SPLIT = 134217729.0


@numba.njit(cache=True)
def _two_sum(a, b):
    s = a + b
    t = s - a
    e = (a - (s - t)) + (b - t)
    return s, e


@numba.njit(cache=True)
def _fast_two_sum(a, b):
    # requires |a| >= |b| or a == 0
    s = a + b
    e = b - (s - a)
    return s, e


@numba.njit(cache=True)
def _two_prod(a, b):
    p = a * b
    ta = _SPLIT * a
    ah = ta - (ta - a)
    al = a - ah
    tb = _SPLIT * b
    bh = tb - (tb - b)
    bl = b - bh
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


@numba.njit(cache=True)
def _dw_add_dw(xh, xl, yh, yl):
    sh, sl = _two_sum(xh, yh)
    th, tl = _two_sum(xl, yl)
    c = sl + th
    vh, vl = _fast_two_sum(sh, c)
    w = tl + vl
    return _fast_two_sum(vh, w)


@numba.njit(cache=True)
def _dw_add_fp(xh, xl, y):
    sh, sl = _two_sum(xh, y)
    v = xl + sl
    return _fast_two_sum(sh, v)


@numba.njit(cache=True)
def _dw_mul_fp_dw(a, yh, yl):
    ph, pl = _two_prod(a, yh)
    pl = pl + a * yl
    return _fast_two_sum(ph, pl)


# ---------------------------------------------------------------------------
# binary64 residual paths


@numba.njit(cache=True)
def residual_f64(a, x, b):
    """r = b - A x, accumulated left to right in binary64."""
    m, n = a.shape
    r = np.empty(m)
    for i in range(m):
        acc = 0.0
        for j in range(n):
            acc += a[i, j] * x[j]
        r[i] = b[i] - acc
    return r


@numba.njit(cache=True)
def atr_f64(a, r):
    """t = A^T r, each output entry accumulated left to right in binary64."""
    m, n = a.shape
    t = np.zeros(n)
    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += a[i, j] * r[i]
        t[j] = acc
    return t


@numba.njit(cache=True)
def saddle_f64(a, b, r, x):
    """f = b - r - A x and g = -A^T r in binary64."""
    m, n = a.shape
    f = np.empty(m)
    for i in range(m):
        acc = 0.0
        for j in range(n):
            acc += a[i, j] * x[j]
        f[i] = (b[i] - r[i]) - acc
    g = np.empty(n)
    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += a[i, j] * r[i]
        g[j] = -acc
    return f, g


# ---------------------------------------------------------------------------
# double-word residual paths


@numba.njit(cache=True)
def residual_dw(a, x, b):
    """r = b - A x with double-word accumulation; A, x, b binary64."""
    m, n = a.shape
    rh = np.empty(m)
    rl = np.empty(m)
    for i in range(m):
        sh = 0.0
        sl = 0.0
        for j in range(n):
            ph, pl = _two_prod(a[i, j], x[j])
            sh, sl = _dw_add_dw(sh, sl, ph, pl)
        dh, dl = _dw_add_dw(b[i], 0.0, -sh, -sl)
        rh[i] = dh
        rl[i] = dl
    return rh, rl


@numba.njit(cache=True)
def atr_dw(a, rh, rl):
    """t = A^T r with double-word r and double-word accumulation."""
    m, n = a.shape
    th = np.empty(n)
    tl = np.empty(n)
    for j in range(n):
        sh = 0.0
        sl = 0.0
        for i in range(m):
            ph, pl = _dw_mul_fp_dw(a[i, j], rh[i], rl[i])
            sh, sl = _dw_add_dw(sh, sl, ph, pl)
        th[j] = sh
        tl[j] = sl
    return th, tl


@numba.njit(cache=True)
def saddle_dw(a, bh, bl, rh, rl, xh, xl):
    """f = b - r - A x and g = -A^T r with all operands double-word."""
    m, n = a.shape
    fh = np.empty(m)
    fl = np.empty(m)
    for i in range(m):
        sh = 0.0
        sl = 0.0
        for j in range(n):
            ph, pl = _dw_mul_fp_dw(a[i, j], xh[j], xl[j])
            sh, sl = _dw_add_dw(sh, sl, ph, pl)
        dh, dl = _dw_add_dw(bh[i], bl[i], -rh[i], -rl[i])
        dh, dl = _dw_add_dw(dh, dl, -sh, -sl)
        fh[i] = dh
        fl[i] = dl
    gh = np.empty(n)
    gl = np.empty(n)
    for j in range(n):
        sh = 0.0
        sl = 0.0
        for i in range(m):
            ph, pl = _dw_mul_fp_dw(a[i, j], rh[i], rl[i])
            sh, sl = _dw_add_dw(sh, sl, ph, pl)
        gh[j] = -sh
        gl[j] = -sl
    return fh, fl, gh, gl


@numba.njit(cache=True)
def matvec_dw(a, xh, xl):
    """y = A x with double-word x and double-word accumulation."""
    m, n = a.shape
    yh = np.empty(m)
    yl = np.empty(m)
    for i in range(m):
        sh = 0.0
        sl = 0.0
        for j in range(n):
            ph, pl = _dw_mul_fp_dw(a[i, j], xh[j], xl[j])
            sh, sl = _dw_add_dw(sh, sl, ph, pl)
        yh[i] = sh
        yl[i] = sl
    return yh, yl


@numba.njit(cache=True)
def dot2(a, b):
    """Compensated dot product; returns the double-word (hi, lo) sum."""
    sh = 0.0
    sl = 0.0
    for k in range(a.shape[0]):
        ph, pl = _two_prod(a[k], b[k])
        sh, sl = _dw_add_dw(sh, sl, ph, pl)
    return sh, sl


# ---------------------------------------------------------------------------
# elementwise double-word vector helpers


@numba.njit(cache=True)
def dw_add_fp_vec(vh, vl, w):
    out_h = np.empty(vh.shape[0])
    out_l = np.empty(vh.shape[0])
    for k in range(vh.shape[0]):
        h, l = _dw_add_fp(vh[k], vl[k], w[k])
        out_h[k] = h
        out_l[k] = l
    return out_h, out_l


@numba.njit(cache=True)
def dw_sub_fp_vec(vh, vl, w):
    out_h = np.empty(vh.shape[0])
    out_l = np.empty(vh.shape[0])
    for k in range(vh.shape[0]):
        h, l = _dw_add_fp(vh[k], vl[k], -w[k])
        out_h[k] = h
        out_l[k] = l
    return out_h, out_l


@numba.njit(cache=True)
def dw_sub_dw_vec(vh, vl, wh, wl):
    out_h = np.empty(vh.shape[0])
    out_l = np.empty(vh.shape[0])
    for k in range(vh.shape[0]):
        h, l = _dw_add_dw(vh[k], vl[k], -wh[k], -wl[k])
        out_h[k] = h
        out_l[k] = l
    return out_h, out_l


@numba.njit(cache=True)
def dw_add_dw_vec(vh, vl, wh, wl):
    out_h = np.empty(vh.shape[0])
    out_l = np.empty(vh.shape[0])
    for k in range(vh.shape[0]):
        h, l = _dw_add_dw(vh[k], vl[k], wh[k], wl[k])
        out_h[k] = h
        out_l[k] = l
    return out_h, out_l
