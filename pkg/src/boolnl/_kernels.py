"""Hot inner loops, each in two flavours.

Every kernel has a numba ``@njit`` version (``*_nb``) and a vectorized
pure-numpy version (``*_np``).  The public name dispatches to one of them,
chosen once at import time:

* ``BNL_DISABLE_NUMBA=1`` forces the numpy path;
* otherwise numba is used when it imports cleanly.

Both flavours are kept importable so tests and ``benchmarks/`` can compare
them directly.
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("BNL_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _DISABLED

# Mersenne prime 2^31 - 1: products of two residues fit in int64.
MODP = 2147483647


# --------------------------------------------------------------------------
# numpy implementations
# --------------------------------------------------------------------------


def fwt_rows_np(a: np.ndarray) -> np.ndarray:
    """In-place unnormalized Walsh-Hadamard butterfly along the last axis."""
    k, size = a.shape
    h = 1
    while h < size:
        v = a.reshape(k, size // (2 * h), 2, h)
        lo = v[:, :, 0, :].copy()
        hi = v[:, :, 1, :]
        v[:, :, 0, :] += hi
        v[:, :, 1, :] = lo - hi
        h *= 2
    return a


def mobius_rows_np(a: np.ndarray) -> np.ndarray:
    """In-place binary Moebius (subset-sum mod 2) butterfly along the last axis."""
    k, size = a.shape
    h = 1
    while h < size:
        v = a.reshape(k, size // (2 * h), 2, h)
        v[:, :, 1, :] ^= v[:, :, 0, :]
        h *= 2
    return a


def affine_min_distance_np(bits: np.ndarray, affine: np.ndarray) -> np.ndarray:
    """Minimum Hamming distance of each row of ``bits`` to any row of ``affine``.

    d(f, g) = wt(f) + wt(g) - 2 |f AND g|, evaluated in chunks to bound memory.
    """
    out = np.empty(bits.shape[0], dtype=np.int64)
    g = affine.astype(np.int64)
    wt_g = g.sum(axis=1)
    step = 4096
    for start in range(0, bits.shape[0], step):
        f = bits[start:start + step].astype(np.int64)
        d = f.sum(axis=1)[:, None] + wt_g[None, :] - 2 * (f @ g.T)
        out[start:start + step] = d.min(axis=1)
    return out


def modp_reduce_np(basis: np.ndarray, pivots: np.ndarray, count: int,
                   v: np.ndarray, p: int) -> np.ndarray:
    """Reduce ``v`` against the first ``count`` normalized echelon rows mod p."""
    r = v % p
    for i in range(count):
        c = r[pivots[i]]
        if c != 0:
            r = (r - c * basis[i]) % p
    return r


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def fwt_rows_nb(a):
        k, size = a.shape
        for row in range(k):
            h = 1
            while h < size:
                for i in range(0, size, 2 * h):
                    for j in range(i, i + h):
                        x = a[row, j]
                        y = a[row, j + h]
                        a[row, j] = x + y
                        a[row, j + h] = x - y
                h *= 2
        return a

    @njit(cache=True)
    def mobius_rows_nb(a):
        k, size = a.shape
        for row in range(k):
            h = 1
            while h < size:
                for i in range(0, size, 2 * h):
                    for j in range(i, i + h):
                        a[row, j + h] ^= a[row, j]
                h *= 2
        return a

    @njit(cache=True)
    def affine_min_distance_nb(bits, affine):
        k, size = bits.shape
        m = affine.shape[0]
        out = np.empty(k, dtype=np.int64)
        for row in range(k):
            best = size + 1
            for g in range(m):
                d = 0
                for x in range(size):
                    if bits[row, x] != affine[g, x]:
                        d += 1
                if d < best:
                    best = d
            out[row] = best
        return out

    @njit(cache=True)
    def modp_reduce_nb(basis, pivots, count, v, p):
        r = v % p
        for i in range(count):
            c = r[pivots[i]]
            if c != 0:
                b = basis[i]
                for j in range(r.shape[0]):
                    r[j] = (r[j] - c * b[j]) % p
        return r

else:  # pragma: no cover
    fwt_rows_nb = fwt_rows_np
    mobius_rows_nb = mobius_rows_np
    affine_min_distance_nb = affine_min_distance_np
    modp_reduce_nb = modp_reduce_np


if USE_NUMBA:
    fwt_rows = fwt_rows_nb
    mobius_rows = mobius_rows_nb
    affine_min_distance = affine_min_distance_nb
    modp_reduce = modp_reduce_nb
else:
    fwt_rows = fwt_rows_np
    mobius_rows = mobius_rows_np
    affine_min_distance = affine_min_distance_np
    modp_reduce = modp_reduce_np


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
