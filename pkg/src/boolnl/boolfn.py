"""Truth tables of n-variable Boolean functions and their elementary combinatorics.

Bit order: position ``i`` of a truth table is f evaluated at the input whose
binary expansion is ``i``, with x1 as the most significant bit.  ANF
coefficients are indexed the same way: monomial ``m`` is the product of the
variables that are 1 in the assignment ``m`` (so x1 is ``m = 2**(n-1)``).
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels

MAX_ARITY = 20

_HEX = set(string.hexdigits)


class TruthTableError(ValueError):
    pass


def _check_arity(n: int) -> None:
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_ARITY:
        raise TruthTableError(f"arity must be an integer in [1, {MAX_ARITY}], got {n!r}")


def _bits_to_int(bits: np.ndarray) -> int:
    packed = np.packbits(bits.astype(np.uint8), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def _int_to_bits(value: int, size: int) -> np.ndarray:
    raw = value.to_bytes((size + 7) // 8, "little")
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:size].copy()


@dataclass(frozen=True)
class TruthTable:
    """An n-variable Boolean function stored as a packed 2**n-bit integer.

    Bit ``i`` of ``value`` is ``f(i)``; this is also the function's index in
    the enumeration of all 2**(2**n) functions.
    """

    n: int
    value: int

    def __post_init__(self):
        _check_arity(self.n)
        if not 0 <= self.value < (1 << self.size):
            raise TruthTableError(f"value out of range for n={self.n}")

    @property
    def size(self) -> int:
        return 1 << self.n

    @cached_property
    def bits(self) -> np.ndarray:
        b = _int_to_bits(self.value, self.size)
        b.flags.writeable = False
        return b

    # constructors ---------------------------------------------------------

    @classmethod
    def from_bits(cls, bits) -> TruthTable:
        b = np.asarray(bits)
        size = b.shape[0] if b.ndim == 1 else -1
        if size < 2 or size & (size - 1):
            raise TruthTableError(f"truth table length must be a power of two >= 2, got {b.shape}")
        if not np.isin(b, (0, 1)).all():
            raise TruthTableError("truth table entries must be 0 or 1")
        return cls(size.bit_length() - 1, _bits_to_int(b))

    @classmethod
    def from_string(cls, text: str) -> TruthTable:
        text = text.strip()
        if not text or set(text) - {"0", "1"}:
            raise TruthTableError(f"not a binary truth table: {text!r}")
        return cls.from_bits(np.frombuffer(text.encode(), dtype=np.uint8) - ord("0"))

    @classmethod
    def from_hex(cls, text: str, n: int | None = None) -> TruthTable:
        """Parse the compact hex form; each digit carries four table bits, first bit high.

        Tables shorter than four bits occupy the high bits of a single digit.
        """
        text = text.strip()
        if text[:2].lower() == "0x":
            text = text[2:]
        if not text or set(text) - _HEX:
            raise TruthTableError(f"not a hex truth table: {text!r}")
        if n is None:
            size = 4 * len(text)
            if size & (size - 1):
                raise TruthTableError(f"hex length {len(text)} does not give a power-of-two table")
            n = size.bit_length() - 1
        _check_arity(n)
        size = 1 << n
        if len(text) != (size + 3) // 4:
            raise TruthTableError(f"expected {(size + 3) // 4} hex digits for n={n}, got {len(text)}")
        nibbles = np.array([int(c, 16) for c in text], dtype=np.uint8)
        bits = np.unpackbits(nibbles[:, None], axis=1)[:, 4:].ravel()
        if bits[size:].any():
            raise TruthTableError("nonzero padding bits in hex truth table")
        return cls.from_bits(bits[:size])

    @classmethod
    def parse(cls, text: str) -> TruthTable:
        """Accept either a 0/1 string or hex (optionally ``0x``-prefixed)."""
        text = text.strip()
        if text[:2].lower() != "0x" and text and not set(text) - {"0", "1"}:
            return cls.from_string(text)
        return cls.from_hex(text)

    # rendering ------------------------------------------------------------

    def to_string(self) -> str:
        return (self.bits + ord("0")).astype(np.uint8).tobytes().decode()

    def to_hex(self) -> str:
        return bits_to_hex(self.bits)

    def __str__(self) -> str:
        return self.to_string()

    # algebra --------------------------------------------------------------

    def __xor__(self, other: TruthTable) -> TruthTable:
        _same_arity(self, other)
        return TruthTable(self.n, self.value ^ other.value)

    def __invert__(self) -> TruthTable:
        return TruthTable(self.n, self.value ^ ((1 << self.size) - 1))

    complement = __invert__


def _same_arity(f: TruthTable, g: TruthTable) -> None:
    if f.n != g.n:
        raise TruthTableError(f"arity mismatch: {f.n} vs {g.n}")


def bits_to_hex(bits: np.ndarray) -> str:
    size = bits.shape[0]
    padded = np.zeros(4 * ((size + 3) // 4), dtype=np.uint8)
    padded[:size] = bits
    nibbles = padded.reshape(-1, 4) @ np.array([8, 4, 2, 1], dtype=np.uint8)
    return "".join("0123456789abcdef"[v] for v in nibbles)


@dataclass(frozen=True)
class AnfCoefficients:
    n: int
    coeffs: np.ndarray

    def monomials(self) -> list[tuple[int, ...]]:
        """Variable index tuples (1-based) of the monomials present."""
        out = []
        for m in np.flatnonzero(self.coeffs):
            out.append(tuple(j + 1 for j in range(self.n) if (int(m) >> (self.n - 1 - j)) & 1))
        return out

    def __str__(self) -> str:
        monos = sorted(self.monomials(), key=lambda m: (len(m), m))
        terms = ["".join(f"x{j}" for j in mono) or "1" for mono in monos]
        return " + ".join(terms) if terms else "0"


def weight(f: TruthTable) -> int:
    return f.value.bit_count()


def hamming_distance(f: TruthTable, g: TruthTable) -> int:
    return weight(f ^ g)


def mobius_transform(f: TruthTable) -> AnfCoefficients:
    a = f.bits.copy()[None, :]
    _kernels.mobius_rows(a)
    a = a[0]
    a.flags.writeable = False
    return AnfCoefficients(f.n, a)


def anf_to_truth_table(anf: AnfCoefficients) -> TruthTable:
    # The binary Moebius transform is its own inverse.
    a = np.asarray(anf.coeffs, dtype=np.uint8).copy()[None, :]
    _kernels.mobius_rows(a)
    return TruthTable.from_bits(a[0])


def _popcounts(size: int) -> np.ndarray:
    idx = np.arange(size, dtype=np.uint32)
    pc = np.zeros(size, dtype=np.int64)
    while idx.any():
        pc += idx & 1
        idx >>= 1
    return pc


def degree(f: TruthTable) -> int:
    coeffs = mobius_transform(f).coeffs
    present = np.flatnonzero(coeffs)
    if present.size == 0:
        return 0
    return int(_popcounts(f.size)[present].max())


def linear_tables(n: int) -> np.ndarray:
    """(2**n, 2**n) uint8 array whose row w is l_w(x) = popcount(w & x) mod 2."""
    _check_arity(n)
    idx = np.arange(1 << n, dtype=np.int64)
    return (_popcounts(1 << n)[idx[:, None] & idx[None, :]] & 1).astype(np.uint8)


def affine_tables(n: int) -> np.ndarray:
    """All 2**(n+1) affine functions as rows: l_w first, then their complements."""
    lin = linear_tables(n)
    return np.concatenate([lin, lin ^ 1])


def affine_functions(n: int) -> list[TruthTable]:
    return [TruthTable.from_bits(row) for row in affine_tables(n)]


def is_affine(f: TruthTable) -> bool:
    return degree(f) <= 1


def sign_encode(f: TruthTable) -> np.ndarray:
    return 1 - 2 * f.bits.astype(np.int64)


def sign_decode(values) -> TruthTable:
    v = np.asarray(values)
    if not np.isin(v, (-1, 1)).all():
        raise TruthTableError("sign vector entries must be +1 or -1")
    return TruthTable.from_bits(((1 - v) // 2).astype(np.uint8))


def function_from_index(n: int, index: int) -> TruthTable:
    _check_arity(n)
    if not 0 <= index < (1 << (1 << n)):
        raise TruthTableError(f"index {index} out of range for n={n}")
    return TruthTable(n, int(index))


def function_to_index(f: TruthTable) -> int:
    return f.value


# -- batch helpers (n <= 6, indexes fit in uint64) -------------------------


def tables_from_indices(n: int, indices) -> np.ndarray:
    """Rows of truth-table bits for an array of function indexes (n <= 6)."""
    if not 1 <= n <= 6:
        raise TruthTableError("batch index helpers support 1 <= n <= 6")
    idx = np.asarray(indices, dtype=np.uint64)
    shifts = np.arange(1 << n, dtype=np.uint64)
    return ((idx[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)


def indices_from_tables(bits: np.ndarray) -> np.ndarray:
    size = bits.shape[1]
    if size > 64:
        raise TruthTableError("batch index helpers support tables of at most 64 bits")
    weights = np.uint64(1) << np.arange(size, dtype=np.uint64)
    return (bits.astype(np.uint64) * weights[None, :]).sum(axis=1, dtype=np.uint64)
