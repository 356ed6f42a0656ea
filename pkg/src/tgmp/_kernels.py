"""Per-sample hot loops, compiled with numba when available.

Setting ``TGMP_DISABLE_NUMBA=1`` in the environment (before import) selects
the pure-numpy implementations instead.  Both variants are always importable
under explicit names (``*_numba`` / ``*_numpy``) so they can be compared.

All kernels read samples ``x[t0 - d]`` for delays up to the model depth, so
callers must guarantee ``t0 >= max_delay``.
"""

from __future__ import annotations

import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("TGMP_DISABLE_NUMBA", "").lower() not in ("1", "true", "yes")


def _njit(fn):
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------------------
# numpy reference path
# ---------------------------------------------------------------------------


def _lagged(x, t0, n, depth):
    """View with ``[k, i] = x[t0 + k - i]`` for ``i < depth``."""
    seg = x[t0 - depth + 1:t0 + n]
    return sliding_window_view(seg, depth)[:, ::-1]


def _lagged_rows(v, depth):
    """For a (T, R) array starting at t0 - depth + 1: ``[k, r, j] = v[k + depth - 1 - j, r]``."""
    return sliding_window_view(v, depth, axis=0)[:, :, ::-1]


def _envelope_table(x, t0, n, depth, p):
    """``|x(t)|^q`` for t in [t0 - depth + 1, t0 + n - 1] and q < p."""
    mag = np.abs(x[t0 - depth + 1:t0 + n])
    e = np.empty((mag.size, p), dtype=np.float64)
    e[:, 0] = 1.0
    for q in range(1, p):
        e[:, q] = e[:, q - 1] * mag
    return e


def design_numpy(x, t0, n, m1, m2, p):
    h = np.array(_lagged(x, t0, n, m1), dtype=np.complex128)
    mag = np.abs(_lagged(x, t0, n, m2))
    m = np.empty((n, m2, p), dtype=np.float64)
    m[:, :, 0] = 1.0
    for k in range(1, p):
        m[:, :, k] = m[:, :, k - 1] * mag
    return h, m


def gmp_simulate_numpy(x, s, t0, n):
    m1, m2, p = s.shape
    h, m = design_numpy(x, t0, n, m1, m2, p)
    # (n, m2*p) @ (m2*p, m1) -> per-sample filtered envelope for every delay i
    env = m.reshape(n, m2 * p) @ s.reshape(m1, m2 * p).T
    return np.einsum("ni,ni->n", h, env)


# The compressed formats evaluate each rank's envelope polynomial once per
# sample and then filter it over the delays, instead of building the
# (n, M2, P) envelope tensor.


def cp_simulate_numpy(x, a, b, c, t0, n):
    poly = _envelope_table(x, t0, n, b.shape[0], c.shape[0]) @ c
    u = np.einsum("nrj,jr->nr", _lagged_rows(poly, b.shape[0]), b)
    return np.einsum("nr,nr->n", _lagged(x, t0, n, a.shape[0]) @ a, u)


def tt_simulate_numpy(x, a, bcore, c, t0, n):
    m2 = bcore.shape[1]
    poly = _envelope_table(x, t0, n, m2, c.shape[1]) @ c.T
    u = np.einsum("nbj,ajb->na", _lagged_rows(poly, m2), bcore, optimize=True)
    return np.einsum("na,na->n", _lagged(x, t0, n, a.shape[0]) @ a, u)


def tucker_simulate_numpy(x, g, a, b, c, t0, n):
    m2 = b.shape[0]
    poly = _envelope_table(x, t0, n, m2, c.shape[0]) @ c
    e = np.einsum("ncj,jb->nbc", _lagged_rows(poly, m2), b, optimize=True)
    return np.einsum("na,abc,nbc->n", _lagged(x, t0, n, a.shape[0]) @ a, g, e, optimize=True)


# ---------------------------------------------------------------------------
# loop path (compiled when numba is present)
# ---------------------------------------------------------------------------


@_njit
def _design_loop(x, t0, n, m1, m2, p):
    h = np.empty((n, m1), dtype=np.complex128)
    m = np.empty((n, m2, p), dtype=np.float64)
    for k in range(n):
        t = t0 + k
        for i in range(m1):
            h[k, i] = x[t - i]
        for j in range(m2):
            a = abs(x[t - j])
            pw = 1.0
            for q in range(p):
                m[k, j, q] = pw
                pw *= a
    return h, m


@_njit
def _envelope_powers(x, t, m2, p, env):
    for j in range(m2):
        a = abs(x[t - j])
        pw = 1.0
        for q in range(p):
            env[j, q] = pw
            pw *= a


@_njit
def _gmp_loop(x, s, t0, n):
    m1, m2, p = s.shape
    y = np.empty(n, dtype=np.complex128)
    env = np.empty((m2, p), dtype=np.float64)
    for k in range(n):
        t = t0 + k
        _envelope_powers(x, t, m2, p, env)
        acc = 0j
        for i in range(m1):
            f = 0j
            for j in range(m2):
                for q in range(p):
                    f += s[i, j, q] * env[j, q]
            acc += f * x[t - i]
        y[k] = acc
    return y


@_njit
def _poly_table(x, t0, n, depth, c, transposed):
    """``out[k, r] = sum_q c[q, r] |x(t0 - depth + 1 + k)|^q`` (``c[r, q]`` if transposed)."""
    if transposed:
        r_count, p = c.shape
    else:
        p, r_count = c.shape
    length = n + depth - 1
    out = np.zeros((length, r_count), dtype=np.complex128)
    base = t0 - depth + 1
    for k in range(length):
        a = abs(x[base + k])
        pw = 1.0
        for q in range(p):
            for r in range(r_count):
                if transposed:
                    out[k, r] += c[r, q] * pw
                else:
                    out[k, r] += c[q, r] * pw
            pw *= a
    return out


@_njit
def _cp_loop(x, a, b, c, t0, n):
    m1, r = a.shape
    m2 = b.shape[0]
    poly = _poly_table(x, t0, n, m2, c, False)
    y = np.empty(n, dtype=np.complex128)
    for k in range(n):
        t = t0 + k
        acc = 0j
        for rr in range(r):
            v = 0j
            for i in range(m1):
                v += a[i, rr] * x[t - i]
            u = 0j
            for j in range(m2):
                u += b[j, rr] * poly[k + m2 - 1 - j, rr]
            acc += v * u
        y[k] = acc
    return y


@_njit
def _tt_loop(x, a, bcore, c, t0, n):
    m1, r1 = a.shape
    m2 = bcore.shape[1]
    r2 = c.shape[0]
    poly = _poly_table(x, t0, n, m2, c, True)
    y = np.empty(n, dtype=np.complex128)
    for k in range(n):
        t = t0 + k
        acc = 0j
        for s1 in range(r1):
            v = 0j
            for i in range(m1):
                v += a[i, s1] * x[t - i]
            u = 0j
            for j in range(m2):
                row = k + m2 - 1 - j
                for s2 in range(r2):
                    u += bcore[s1, j, s2] * poly[row, s2]
            acc += v * u
        y[k] = acc
    return y


@_njit
def _tucker_loop(x, g, a, b, c, t0, n):
    m1, r1 = a.shape
    m2, r2 = b.shape
    r3 = c.shape[1]
    poly = _poly_table(x, t0, n, m2, c, False)
    y = np.empty(n, dtype=np.complex128)
    e = np.empty((r2, r3), dtype=np.complex128)
    v = np.empty(r1, dtype=np.complex128)
    for k in range(n):
        t = t0 + k
        for s2 in range(r2):
            for s3 in range(r3):
                w = 0j
                for j in range(m2):
                    w += b[j, s2] * poly[k + m2 - 1 - j, s3]
                e[s2, s3] = w
        for s1 in range(r1):
            w = 0j
            for i in range(m1):
                w += a[i, s1] * x[t - i]
            v[s1] = w
        acc = 0j
        for s1 in range(r1):
            for s2 in range(r2):
                for s3 in range(r3):
                    acc += g[s1, s2, s3] * v[s1] * e[s2, s3]
        y[k] = acc
    return y


def _c(arr, dtype=np.complex128):
    return np.ascontiguousarray(arr, dtype=dtype)


def design_numba(x, t0, n, m1, m2, p):
    return _design_loop(_c(x), int(t0), int(n), int(m1), int(m2), int(p))


def gmp_simulate_numba(x, s, t0, n):
    return _gmp_loop(_c(x), _c(s), int(t0), int(n))


def cp_simulate_numba(x, a, b, c, t0, n):
    return _cp_loop(_c(x), _c(a), _c(b), _c(c), int(t0), int(n))


def tt_simulate_numba(x, a, bcore, c, t0, n):
    return _tt_loop(_c(x), _c(a), _c(bcore), _c(c), int(t0), int(n))


def tucker_simulate_numba(x, g, a, b, c, t0, n):
    return _tucker_loop(_c(x), _c(g), _c(a), _c(b), _c(c), int(t0), int(n))


if USE_NUMBA:
    design = design_numba
    gmp_simulate = gmp_simulate_numba
    cp_simulate = cp_simulate_numba
    tt_simulate = tt_simulate_numba
    tucker_simulate = tucker_simulate_numba
else:
    design = design_numpy
    gmp_simulate = gmp_simulate_numpy
    cp_simulate = cp_simulate_numpy
    tt_simulate = tt_simulate_numpy
    tucker_simulate = tucker_simulate_numpy


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
