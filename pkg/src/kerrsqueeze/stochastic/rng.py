"""Counter-based normal deviates (Philox4x64-10) usable inside numba kernels.

Every random number is a pure function of ``(seed, trajectory, step, block)``
so a trajectory reproduces bit-for-bit whatever the batching or thread count.
The block function matches ``numpy.random.Philox``; the tests check this.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_TWO_M53 = 2.0 ** -53
_TWO_PI = 2.0 * math.pi

# key[1] domain tags so different uses of one seed never share a stream
TAG_REDUCED = 1
TAG_FULL = 2
TAG_INITIAL = 3


@njit(inline="always")
def _mulhilo(a, b):
    a_lo = a & _MASK32
    a_hi = a >> _S32
    b_lo = b & _MASK32
    b_hi = b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = (ll >> _S32) + (lh & _MASK32) + (hl & _MASK32)
    hi = hh + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)
    return hi, a * b


@njit(cache=True)
def philox4x64(c0, c1, c2, c3, k0, k1):
    """Ten-round Philox4x64 block function on ``uint64`` words."""
    for r in range(10):
        if r > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@njit(inline="always")
def _uniform(x):
    return (np.float64(x >> _S11) + 0.5) * _TWO_M53


@njit(cache=True)
def normal4(seed, tag, trajectory, step, block):
    """Four independent N(0, 1) deviates for one (trajectory, step, block)."""
    x0, x1, x2, x3 = philox4x64(np.uint64(step), np.uint64(trajectory), np.uint64(block),
                                np.uint64(tag), np.uint64(seed), np.uint64(tag))
    u0 = _uniform(x0)
    u1 = _uniform(x1)
    u2 = _uniform(x2)
    u3 = _uniform(x3)
    r0 = math.sqrt(-2.0 * math.log(u0))
    r1 = math.sqrt(-2.0 * math.log(u2))
    return (r0 * math.cos(_TWO_PI * u1), r0 * math.sin(_TWO_PI * u1),
            r1 * math.cos(_TWO_PI * u3), r1 * math.sin(_TWO_PI * u3))


@njit(cache=True)
def _fill_normals(seed, tag, trajectory, step, out):
    n = out.shape[0]
    for b in range((n + 3) // 4):
        z0, z1, z2, z3 = normal4(seed, tag, trajectory, step, b)
        i = 4 * b
        out[i] = z0
        if i + 1 < n:
            out[i + 1] = z1
        if i + 2 < n:
            out[i + 2] = z2
        if i + 3 < n:
            out[i + 3] = z3


def standard_normals(seed: int, trajectory: int, step: int, n: int, tag: int = TAG_REDUCED) -> np.ndarray:
    """``n`` deterministic N(0, 1) deviates for one trajectory and step."""
    if seed < 0 or trajectory < 0 or step < 0:
        raise ValueError("seed, trajectory and step must be non-negative")
    out = np.empty(n)
    _fill_normals(seed, tag, trajectory, step, out)
    return out
