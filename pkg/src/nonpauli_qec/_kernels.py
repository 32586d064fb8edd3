"""Numba kernels for in-place statevector updates.

Qubit ``q`` addresses bit ``q`` of the amplitude index (little-endian).
All kernels mutate ``psi`` in place.
"""

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def apply_single(psi, g, q):
    m = 1 << q
    g00 = g[0, 0]
    g01 = g[0, 1]
    g10 = g[1, 0]
    g11 = g[1, 1]
    half = psi.shape[0] >> 1
    for k in range(half):
        i0 = ((k >> q) << (q + 1)) | (k & (m - 1))
        i1 = i0 | m
        a = psi[i0]
        b = psi[i1]
        psi[i0] = g00 * a + g01 * b
        psi[i1] = g10 * a + g11 * b


@numba.njit(cache=True, nogil=True)
def apply_controlled(psi, g, c, t):
    mc = 1 << c
    mt = 1 << t
    lo = min(c, t)
    hi = max(c, t)
    g00 = g[0, 0]
    g01 = g[0, 1]
    g10 = g[1, 0]
    g11 = g[1, 1]
    quarter = psi.shape[0] >> 2
    for k in range(quarter):
        # insert a zero bit at position lo, then at position hi
        x = ((k >> lo) << (lo + 1)) | (k & ((1 << lo) - 1))
        x = ((x >> hi) << (hi + 1)) | (x & ((1 << hi) - 1))
        i0 = x | mc
        i1 = i0 | mt
        a = psi[i0]
        b = psi[i1]
        psi[i0] = g00 * a + g01 * b
        psi[i1] = g10 * a + g11 * b


@numba.njit(cache=True, nogil=True)
def prob_one(psi, q):
    m = 1 << q
    half = psi.shape[0] >> 1
    acc = 0.0
    for k in range(half):
        i1 = (((k >> q) << (q + 1)) | (k & (m - 1))) | m
        v = psi[i1]
        acc += v.real * v.real + v.imag * v.imag
    return acc


@numba.njit(cache=True, nogil=True)
def project(psi, q, outcome, scale):
    """Zero the branch ``bit q != outcome`` and multiply the rest by ``scale``."""
    m = 1 << q
    half = psi.shape[0] >> 1
    for k in range(half):
        i0 = ((k >> q) << (q + 1)) | (k & (m - 1))
        i1 = i0 | m
        if outcome == 0:
            psi[i0] *= scale
            psi[i1] = 0.0
        else:
            psi[i0] = 0.0
            psi[i1] *= scale


@numba.njit(cache=True, nogil=True)
def move_to_zero(psi, q):
    """Fold the ``bit q = 1`` branch onto ``bit q = 0`` (reset after measurement)."""
    m = 1 << q
    half = psi.shape[0] >> 1
    for k in range(half):
        i0 = ((k >> q) << (q + 1)) | (k & (m - 1))
        i1 = i0 | m
        psi[i0] = psi[i0] + psi[i1]
        psi[i1] = 0.0


def warmup():
    psi = np.zeros(8, dtype=np.complex128)
    psi[0] = 1.0
    g = np.eye(2, dtype=np.complex128)
    apply_single(psi, g, 1)
    apply_controlled(psi, g, 0, 2)
    prob_one(psi, 1)
    project(psi, 0, 0, 1.0)
    move_to_zero(psi, 2)
