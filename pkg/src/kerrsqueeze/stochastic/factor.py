"""Square-root factorization ``D = B B^T`` of complex symmetric diffusion matrices.

Elimination follows Cholesky without conjugation in the inner products.  A
plain complex Cholesky breaks down on the vacuum diffusion block
``[[0, z], [z, 0]]``, so the elimination is pivoted: the largest remaining
diagonal is moved to the front, and when every remaining diagonal is small
compared with the largest off-diagonal entry the pair is first rotated by
45 degrees (a real orthogonal change of noise basis, which leaves ``B B^T``
unchanged).  Pivots below ``PIVOT_FLOOR`` close the factorization: the
remaining block is zero to that accuracy.
"""
from __future__ import annotations

import cmath
import math

import numpy as np
from numba import njit

from ..errors import FactorizationError

PIVOT_FLOOR = 1e-14
# rotate when max|diag| < ROTATE_RATIO * max|offdiag| in the active block
ROTATE_RATIO = 0.1
RESIDUAL_TOL = 1e-10
_INV_SQRT2 = 1.0 / math.sqrt(2.0)


@njit(cache=True)
def _factor_inplace(a, lower, q):
    """Factor symmetric ``a`` (destroyed) so that ``(q @ lower) @ (q @ lower).T == a``.

    ``lower`` receives the lower-triangular factor in the pivoted basis and
    ``q`` the accumulated real orthogonal basis change.
    """
    n = a.shape[0]
    lower[:, :] = 0.0
    q[:, :] = 0.0
    for i in range(n):
        q[i, i] = 1.0
    for k in range(n):
        dmax = -1.0
        piv = k
        for j in range(k, n):
            m = abs(a[j, j])
            if m > dmax:
                dmax = m
                piv = j
        omax = 0.0
        oi = k
        oj = k
        for i in range(k, n):
            for j in range(i + 1, n):
                m = abs(a[i, j])
                if m > omax:
                    omax = m
                    oi = i
                    oj = j
        if dmax < PIVOT_FLOOR and omax < PIVOT_FLOOR:
            return
        if dmax < ROTATE_RATIO * omax:
            # new basis vectors (e_i + e_j)/sqrt2 and (e_j - e_i)/sqrt2
            for r in range(n):
                x = a[r, oi]
                y = a[r, oj]
                a[r, oi] = (x + y) * _INV_SQRT2
                a[r, oj] = (y - x) * _INV_SQRT2
            for c in range(n):
                x = a[oi, c]
                y = a[oj, c]
                a[oi, c] = (x + y) * _INV_SQRT2
                a[oj, c] = (y - x) * _INV_SQRT2
            for c in range(k):
                x = lower[oi, c]
                y = lower[oj, c]
                lower[oi, c] = (x + y) * _INV_SQRT2
                lower[oj, c] = (y - x) * _INV_SQRT2
            for r in range(n):
                x = q[r, oi]
                y = q[r, oj]
                q[r, oi] = (x + y) * _INV_SQRT2
                q[r, oj] = (y - x) * _INV_SQRT2
            dmax = -1.0
            for j in range(k, n):
                m = abs(a[j, j])
                if m > dmax:
                    dmax = m
                    piv = j
        if piv != k:
            for r in range(n):
                t = a[r, k]
                a[r, k] = a[r, piv]
                a[r, piv] = t
            for c in range(n):
                t = a[k, c]
                a[k, c] = a[piv, c]
                a[piv, c] = t
            for c in range(k):
                t = lower[k, c]
                lower[k, c] = lower[piv, c]
                lower[piv, c] = t
            for r in range(n):
                t = q[r, k]
                q[r, k] = q[r, piv]
                q[r, piv] = t
        if abs(a[k, k]) < PIVOT_FLOOR:
            return
        lkk = cmath.sqrt(a[k, k])
        lower[k, k] = lkk
        for i in range(k + 1, n):
            lower[i, k] = a[i, k] / lkk
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i, j] -= lower[i, k] * lower[j, k]


@njit(cache=True)
def _factor_into(d, out, work, lower, q):
    n = d.shape[0]
    for i in range(n):
        for j in range(n):
            work[i, j] = d[i, j]
    _factor_inplace(work, lower, q)
    for i in range(n):
        for j in range(n):
            s = 0.0j
            for m in range(n):
                s += q[i, m] * lower[m, j]
            out[i, j] = s


@njit(cache=True)
def factor2(x, y, z):
    """Allocation-free 2x2 version: returns ``(b11, b12, b21, b22)`` for ``[[x, y], [y, z]]``.

    Same pivoting rule as the general routine.
    """
    # squared magnitudes: no hypot calls in the hot loop
    ax = x.real * x.real + x.imag * x.imag
    az = z.real * z.real + z.imag * z.imag
    ay = y.real * y.real + y.imag * y.imag
    dmax = max(ax, az)
    if dmax < PIVOT_FLOOR ** 2 and ay < PIVOT_FLOOR ** 2:
        return 0.0j, 0.0j, 0.0j, 0.0j
    if dmax >= ROTATE_RATIO ** 2 * ay:
        if az > ax:
            l11 = cmath.sqrt(z)
            l21 = y / l11
            l22 = cmath.sqrt(x - l21 * l21)
            return l21, l22, l11, 0.0j
        l11 = cmath.sqrt(x)
        l21 = y / l11
        return l11, 0.0j, l21, cmath.sqrt(z - l21 * l21)
    # rotated basis: u = (e1 + e2)/sqrt2, v = (e2 - e1)/sqrt2
    uu = 0.5 * (x + z) + y
    vv = 0.5 * (x + z) - y
    uv = 0.5 * (z - x)
    s = _INV_SQRT2
    if vv.real * vv.real + vv.imag * vv.imag > uu.real * uu.real + uu.imag * uu.imag:
        l11 = cmath.sqrt(vv)
        l21 = uv / l11
        l22 = cmath.sqrt(uu - l21 * l21)
        # pivoted order (v, u); B = [u v] @ P @ L
        return (s * l21 - s * l11, s * l22, s * l21 + s * l11, s * l22)
    l11 = cmath.sqrt(uu)
    l21 = uv / l11
    l22 = cmath.sqrt(vv - l21 * l21)
    return (s * l11 - s * l21, -s * l22, s * l11 + s * l21, s * l22)


def _blocks(d):
    n = d.shape[0]
    h = n // 2
    if n % 2 == 0 and n > 2 and not np.any(d[:h, h:]) and not np.any(d[h:, :h]):
        return [slice(0, h), slice(h, n)]
    return [slice(0, n)]


def factor_diffusion(d, check=True) -> np.ndarray:
    """Return ``B`` with ``B @ B.T == d`` for a complex symmetric ``d``.

    Block-diagonal input (zero off-diagonal halves) is factored blockwise so
    that ``B`` keeps the same block structure and noise channels never mix
    an amplitude with its partner.

    Raises
    ------
    FactorizationError
        If ``d`` is not symmetric or the multiply-back residual exceeds
        ``1e-10`` relative to ``max|d|``.
    """
    d = np.asarray(d, dtype=complex)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise FactorizationError(f"expected a square matrix, got shape {d.shape}")
    scale = max(float(np.abs(d).max(initial=0.0)), 1.0)
    if np.abs(d - d.T).max(initial=0.0) > 1e-12 * scale:
        raise FactorizationError("diffusion matrix is not symmetric")
    b = np.zeros_like(d)
    for blk in _blocks(d):
        sub = np.ascontiguousarray(d[blk, blk])
        m = sub.shape[0]
        out = np.empty((m, m), dtype=complex)
        _factor_into(sub, out, np.empty((m, m), dtype=complex),
                     np.empty((m, m), dtype=complex), np.empty((m, m)))
        b[blk, blk] = out
    if check:
        resid = np.abs(b @ b.T - d).max(initial=0.0)
        if not resid <= RESIDUAL_TOL * scale:
            raise FactorizationError(f"factorization residual {resid:.3e} exceeds tolerance")
    return b
