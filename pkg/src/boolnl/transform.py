"""Walsh-Hadamard machinery and exact nonlinearity.

Spectra are signed integers.  ``W_f(w) = sum_x (-1)^(f(x) XOR l_w(x))`` with
``l_w(x) = popcount(w & x) mod 2``, which makes the spectrum the product of
the Sylvester-ordered Hadamard matrix with the +1/-1 encoded table.
"""

from __future__ import annotations

import threading
from functools import lru_cache

import numpy as np

from . import _kernels
from .boolfn import TruthTable, affine_tables, sign_encode

NAIVE_MAX_ARITY = 14
BRUTEFORCE_MAX_ARITY = 12

_hadamard_lock = threading.Lock()


class ArityTooLarge(ValueError):
    pass


def _power_of_two(order: int) -> int:
    if not isinstance(order, (int, np.integer)) or order < 2 or order & (order - 1):
        raise ValueError(f"Hadamard order must be a power of two >= 2, got {order!r}")
    return int(order)


@lru_cache(maxsize=None)
def _hadamard_cached(order: int) -> np.ndarray:
    h = np.array([[1, 1], [1, -1]], dtype=np.int64)
    while h.shape[0] < order:
        h = np.block([[h, h], [h, -h]])
    h.flags.writeable = False
    return h


def hadamard(order: int) -> np.ndarray:
    """Sylvester Walsh-Hadamard matrix of the given order (read-only, memoized)."""
    order = _power_of_two(order)
    with _hadamard_lock:
        return _hadamard_cached(order)


def walsh_naive(f: TruthTable) -> np.ndarray:
    """Spectrum as an explicit O(N^2) matrix-vector product."""
    if f.n > NAIVE_MAX_ARITY:
        raise ArityTooLarge(f"walsh_naive limited to n <= {NAIVE_MAX_ARITY}; use fwt for n={f.n}")
    return hadamard(f.size) @ sign_encode(f)


def fwt(f: TruthTable) -> np.ndarray:
    a = sign_encode(f)[None, :].copy()
    return _kernels.fwt_rows(a)[0]


def fwt_signs(signs: np.ndarray) -> np.ndarray:
    """Batched transform of integer rows (any values, not only +1/-1)."""
    a = np.array(signs, dtype=np.int64, ndmin=2, copy=True)
    return _kernels.fwt_rows(a)


def spectra(bits: np.ndarray) -> np.ndarray:
    """Walsh spectra of a (k, N) block of truth-table rows."""
    a = 1 - 2 * np.asarray(bits, dtype=np.int64)
    return _kernels.fwt_rows(np.ascontiguousarray(a))


def nonlinearity_from_spectrum(spec: np.ndarray) -> np.ndarray | int:
    spec = np.asarray(spec)
    size = spec.shape[-1]
    nl = size // 2 - np.abs(spec).max(axis=-1) // 2
    return int(nl) if spec.ndim == 1 else nl


def nonlinearity(f: TruthTable) -> int:
    return nonlinearity_from_spectrum(fwt(f))


def nonlinearities(bits: np.ndarray) -> np.ndarray:
    """Nonlinearity of every row of a (k, N) bit block, via the fast transform."""
    return nonlinearity_from_spectrum(spectra(bits))


def nonlinearity_bruteforce(f: TruthTable) -> int:
    """Minimum Hamming distance to the 2^(n+1) affine functions, counted directly."""
    if f.n > BRUTEFORCE_MAX_ARITY:
        raise ArityTooLarge(f"brute-force nonlinearity limited to n <= {BRUTEFORCE_MAX_ARITY}")
    return int(nonlinearities_bruteforce(f.bits[None, :])[0])


def nonlinearities_bruteforce(bits: np.ndarray) -> np.ndarray:
    size = bits.shape[1]
    n = size.bit_length() - 1
    if n > BRUTEFORCE_MAX_ARITY:
        raise ArityTooLarge(f"brute-force nonlinearity limited to n <= {BRUTEFORCE_MAX_ARITY}")
    return _kernels.affine_min_distance(np.ascontiguousarray(bits, dtype=np.uint8), affine_tables(n))


def affine_distances(f: TruthTable) -> np.ndarray:
    """Distances to every affine function, in ``affine_functions`` order."""
    half = f.size // 2
    w = fwt(f) // 2
    return np.concatenate([half - w, half + w])


def format_spectrum(spec: np.ndarray) -> str:
    return "".join(f"{w}\t{int(v)}\n" for w, v in enumerate(spec))
