"""Deterministic example sets for the spectrum and nonlinearity tasks.

Record ``i`` of a generated set is derived from ``(seed, i)`` through the
SplitMix64 counter hash, so generation never depends on worker count or
scheduling.  Targets are stored as integers and converted to floats only
when a network consumes them.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator

import numpy as np

from . import _kernels
from .boolfn import TruthTable, bits_to_hex
from .seeding import derive_seed, splitmix64
from .transform import nonlinearities, spectra

TASKS = ("walsh_spectrum", "nonlinearity")
SPLITS = ("train", "test", "all")
MAGIC = "BNLDS v1"
MAX_ARITY = 10


class DatasetError(ValueError):
    pass


class DatasetFormatError(DatasetError):
    pass


@dataclass(frozen=True)
class Example:
    input: np.ndarray
    target: np.ndarray


@dataclass(frozen=True)
class Dataset:
    n: int
    task: str
    bits: np.ndarray = field(repr=False)
    targets: np.ndarray = field(repr=False)
    seed: int = 0
    split: str = "all"
    # Per-set float target scale; 1.0 keeps raw integer-valued targets.
    target_scale: float = 1.0

    def __post_init__(self):
        if self.task not in TASKS:
            raise DatasetError(f"unknown task {self.task!r}")
        if self.split not in SPLITS:
            raise DatasetError(f"unknown split tag {self.split!r}")
        size = 1 << self.n
        if self.bits.ndim != 2 or self.bits.shape[1] != size:
            raise DatasetError(f"bits must have shape (k, {size})")
        if self.targets.shape != (self.bits.shape[0], self.target_width):
            raise DatasetError(f"targets must have shape ({self.bits.shape[0]}, {self.target_width})")

    def __len__(self) -> int:
        return self.bits.shape[0]

    @property
    def target_width(self) -> int:
        return (1 << self.n) if self.task == "walsh_spectrum" else 1

    def inputs(self) -> np.ndarray:
        """+1/-1 encoded tables as float64 rows."""
        return 1.0 - 2.0 * self.bits.astype(np.float64)

    def float_targets(self) -> np.ndarray:
        return self.targets.astype(np.float64) * self.target_scale

    def examples(self) -> Iterator[Example]:
        x = self.inputs()
        for i in range(len(self)):
            yield Example(x[i], self.targets[i])

    def function(self, i: int) -> TruthTable:
        return TruthTable.from_bits(self.bits[i])

    def subset(self, rows, split: str | None = None) -> Dataset:
        rows = np.asarray(rows, dtype=np.int64)
        return replace(self, bits=self.bits[rows], targets=self.targets[rows],
                       split=split or self.split)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.n == other.n and self.task == other.task and self.seed == other.seed
                and self.split == other.split and self.target_scale == other.target_scale
                and np.array_equal(self.bits, other.bits)
                and np.array_equal(self.targets, other.targets))

    __hash__ = None


def compute_targets(bits: np.ndarray, task: str) -> np.ndarray:
    if task == "walsh_spectrum":
        return spectra(bits)
    if task == "nonlinearity":
        return np.asarray(nonlinearities(bits), dtype=np.int64).reshape(-1, 1)
    raise DatasetError(f"unknown task {task!r}")


def _check_arity(n: int) -> None:
    if not 1 <= n <= MAX_ARITY:
        raise DatasetError(f"dataset arity must be in [1, {MAX_ARITY}], got {n}")


def _hash_rows(n: int, seed: int, start: int, stop: int) -> np.ndarray:
    """Truth tables for stream positions [start, stop), each from (seed, position) only."""
    size = 1 << n
    words = max(1, size // 64)
    counters = np.arange(start * words, stop * words, dtype=np.uint64)
    raw = splitmix64(seed, counters)
    if size < 64:
        raw = raw >> np.uint64(64 - size)
    raw = raw.reshape(-1, words)
    out = raw.astype("<u8").view(np.uint8).reshape(stop - start, -1)
    return np.unpackbits(out, axis=1, bitorder="little")[:, :size].copy()


def _space_size(n: int) -> int:
    return 1 << (1 << n)


def sample_tables(n: int, count: int, seed: int, tag: str = "generate",
                  exclude: np.ndarray | None = None) -> np.ndarray:
    """``count`` distinct truth tables, none of which appear in ``exclude``.

    For n <= 4 the whole space is ordered by a seeded hash key (a shuffle) and
    a prefix is taken; larger n draws hashed tables and drops repeats.
    """
    _check_arity(n)
    size = 1 << n
    n_excl = 0 if exclude is None else len(exclude)
    if count < 0 or count + n_excl > _space_size(n):
        raise DatasetError(f"requested {count} functions but the n={n} space has "
                           f"{_space_size(n)} (minus {n_excl} excluded)")
    s = derive_seed(seed, tag)
    if n <= 4:
        total = _space_size(n)
        idx = np.arange(total, dtype=np.uint64)
        order = np.lexsort((idx, splitmix64(s, idx)))
        shifts = np.arange(size, dtype=np.uint64)
        all_bits = ((order.astype(np.uint64)[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
        if exclude is not None and len(exclude):
            seen = {r.tobytes() for r in np.asarray(exclude, dtype=np.uint8)}
            keep = np.fromiter((r.tobytes() not in seen for r in all_bits), bool, total)
            all_bits = all_bits[keep]
        return all_bits[:count]

    seen = set() if exclude is None else {r.tobytes() for r in np.asarray(exclude, dtype=np.uint8)}
    rows: list[np.ndarray] = []
    pos = 0
    chunk = max(1024, count + count // 8)
    while len(rows) < count:
        block = _hash_rows(n, s, pos, pos + chunk)
        pos += chunk
        for r in block:
            key = r.tobytes()
            if key in seen:
                continue
            seen.add(key)
            rows.append(r)
            if len(rows) == count:
                break
    if not rows:
        return np.zeros((0, size), dtype=np.uint8)
    return np.stack(rows)


def generate(n: int, task: str, size: int, seed: int, split: str = "all") -> Dataset:
    if task not in TASKS:
        raise DatasetError(f"unknown task {task!r}")
    bits = sample_tables(n, size, seed)
    return Dataset(n, task, bits, compute_targets(bits, task), seed=seed, split=split)


# -- linear independence ----------------------------------------------------


class _EchelonModP:
    """Incremental row echelon form over GF(p), p = 2^31 - 1."""

    def __init__(self, width: int, capacity: int):
        self.basis = np.zeros((capacity, width), dtype=np.int64)
        self.pivots = np.zeros(capacity, dtype=np.int64)
        self.count = 0

    def add(self, v: np.ndarray) -> bool:
        p = _kernels.MODP
        if self.count == self.basis.shape[0]:
            return False
        r = _kernels.modp_reduce(self.basis, self.pivots, self.count,
                                 np.ascontiguousarray(v, dtype=np.int64), p)
        nz = np.flatnonzero(r)
        if nz.size == 0:
            return False
        c = int(nz[0])
        inv = pow(int(r[c]), p - 2, p)
        self.basis[self.count] = (r * inv) % p
        self.pivots[self.count] = c
        self.count += 1
        return True


def rank_modp(vectors) -> int:
    m = np.asarray(vectors, dtype=np.int64)
    ech = _EchelonModP(m.shape[1], min(m.shape))
    for row in m:
        ech.add(row)
    return ech.count


def _rank_bareiss(rows: list[list[int]]) -> int:
    """Fraction-free Gaussian elimination over the integers (exact)."""
    a = [list(r) for r in rows]
    m, ncols = len(a), len(a[0])
    rank, prev = 0, 1
    for col in range(ncols):
        piv = next((i for i in range(rank, m) if a[i][col] != 0), None)
        if piv is None:
            continue
        a[rank], a[piv] = a[piv], a[rank]
        p = a[rank][col]
        for i in range(rank + 1, m):
            ai = a[i]
            f = ai[col]
            ar = a[rank]
            for j in range(col + 1, ncols):
                ai[j] = (p * ai[j] - f * ar[j]) // prev
            ai[col] = 0
        prev = p
        rank += 1
        if rank == m:
            break
    return rank


def rank(vectors) -> int:
    """Rank over the rationals of integer-valued row vectors.

    Full rank modulo a prime certifies full rational rank; otherwise the exact
    fraction-free elimination decides.
    """
    m = np.asarray(vectors)
    if m.ndim != 2 or m.shape[0] == 0:
        raise DatasetError("rank needs a nonempty 2-D array of equal-length vectors")
    if not np.array_equal(m, np.round(m)):
        raise DatasetError("rank expects integer-valued vectors")
    m = m.astype(np.int64)
    if rank_modp(m) == min(m.shape):
        return min(m.shape)
    return _rank_bareiss(m.tolist())


def independent_set(n: int, count: int, seed: int, max_draws: int | None = None) -> Dataset:
    """``count`` functions whose +1/-1 vectors are linearly independent, with spectra."""
    _check_arity(n)
    size = 1 << n
    if not 1 <= count <= size:
        raise DatasetError(f"count must be in [1, {size}] for n={n}")
    budget = max_draws if max_draws is not None else 64 * count + 1024
    s = derive_seed(seed, "independent")
    ech = _EchelonModP(size, count)
    chosen: list[np.ndarray] = []
    pos = 0
    while len(chosen) < count:
        if pos >= budget:
            raise DatasetError(f"could not reach rank {count} within {budget} draws")
        step = min(256, budget - pos)
        block = _hash_rows(n, s, pos, pos + step)
        pos += step
        for r in block:
            if ech.add(1 - 2 * r.astype(np.int64)):
                chosen.append(r)
                if len(chosen) == count:
                    break
    bits = np.stack(chosen)
    return Dataset(n, "walsh_spectrum", bits, compute_targets(bits, "walsh_spectrum"),
                   seed=seed, split="train")


# -- splitting ----------------------------------------------------------------


def split(d: Dataset, train_fraction: float | None = None, seed: int = 0,
          train_size: int | None = None) -> tuple[Dataset, Dataset]:
    """Seeded disjoint partition; each side keeps the original record order."""
    k = len(d)
    if train_size is None:
        if train_fraction is None or not 0 < train_fraction < 1:
            raise DatasetError("train_fraction must lie strictly between 0 and 1")
        train_size = int(round(train_fraction * k))
    if not 0 < train_size < k:
        raise DatasetError(f"degenerate split: {train_size} of {k} records for training")
    keys = splitmix64(derive_seed(seed, "split"), np.arange(k, dtype=np.uint64))
    order = np.lexsort((np.arange(k), keys))
    train_rows = np.sort(order[:train_size])
    test_rows = np.sort(order[train_size:])
    return d.subset(train_rows, "train"), d.subset(test_rows, "test")


# -- persistence ----------------------------------------------------------------

_HEX_CHARS = np.frombuffer(b"0123456789abcdef", dtype=np.uint8)
_HEX_LOOKUP = np.full(256, 255, dtype=np.uint8)
for _i, _c in enumerate(b"0123456789abcdef"):
    _HEX_LOOKUP[_c] = _i
for _i, _c in enumerate(b"ABCDEF"):
    _HEX_LOOKUP[_c] = 10 + _i


def _rows_to_hex(bits: np.ndarray) -> list[str]:
    k, size = bits.shape
    width = 4 * ((size + 3) // 4)
    padded = np.zeros((k, width), dtype=np.uint8)
    padded[:, :size] = bits
    nib = padded.reshape(k, -1, 4) @ np.array([8, 4, 2, 1], dtype=np.uint8)
    chars = _HEX_CHARS[nib]
    return [row.tobytes().decode() for row in chars]


def _hex_to_rows(hexes: list[str], size: int, first_line: int) -> np.ndarray:
    digits = (size + 3) // 4
    for i, h in enumerate(hexes):
        if len(h) != digits:
            raise DatasetFormatError(
                f"line {first_line + i}: truth table has {len(h)} hex digits, expected {digits}")
    if not hexes:
        return np.zeros((0, size), dtype=np.uint8)
    raw = np.frombuffer("".join(hexes).encode("ascii", "replace"), dtype=np.uint8)
    nib = _HEX_LOOKUP[raw].reshape(len(hexes), digits)
    bad = np.argwhere(nib == 255)
    if bad.size:
        r, c = bad[0]
        raise DatasetFormatError(f"line {first_line + r}: invalid hex digit at offset {c}")
    bits = np.unpackbits(nib[:, :, None], axis=2)[:, :, 4:].reshape(len(hexes), -1)
    if bits[:, size:].any():
        r = int(np.flatnonzero(bits[:, size:].any(axis=1))[0])
        raise DatasetFormatError(f"line {first_line + r}: nonzero padding bits")
    return np.ascontiguousarray(bits[:, :size])


def dumps(d: Dataset) -> str:
    header = f"{MAGIC} n={d.n} task={d.task} size={len(d)} seed={d.seed} split={d.split}\n"
    hexes = _rows_to_hex(d.bits)
    lines = [f"{h}\t{' '.join(map(str, t))}\n" for h, t in zip(hexes, d.targets.tolist())]
    return header + "".join(lines)


def save(d: Dataset, path) -> None:
    Path(path).write_text(dumps(d), encoding="utf-8", newline="\n")


def _parse_header(line: str) -> dict:
    if not line.startswith(MAGIC + " "):
        raise DatasetFormatError(f"line 1: expected header starting with {MAGIC!r}")
    fields = {}
    for tok in line[len(MAGIC) + 1:].split():
        key, sep, val = tok.partition("=")
        if not sep:
            raise DatasetFormatError(f"line 1: malformed header field {tok!r}")
        fields[key] = val
    missing = {"n", "task", "size", "seed", "split"} - fields.keys()
    if missing:
        raise DatasetFormatError(f"line 1: header missing {sorted(missing)}")
    try:
        fields["n"] = int(fields["n"])
        fields["size"] = int(fields["size"])
        fields["seed"] = int(fields["seed"])
    except ValueError as e:
        raise DatasetFormatError(f"line 1: {e}") from None
    if fields["task"] not in TASKS or fields["split"] not in SPLITS:
        raise DatasetFormatError("line 1: unknown task or split tag")
    if not 1 <= fields["n"] <= MAX_ARITY or fields["size"] < 0:
        raise DatasetFormatError("line 1: arity or size out of range")
    return fields


def loads(text: str, verify: str = "spot") -> Dataset:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DatasetFormatError("line 1: empty file")
    h = _parse_header(lines[0])
    n, k = h["n"], h["size"]
    records = lines[1:]
    if len(records) != k:
        raise DatasetFormatError(
            f"line {min(k, len(records)) + 2}: header declares {k} records, found {len(records)}")
    size = 1 << n
    width = size if h["task"] == "walsh_spectrum" else 1
    hexes, targets = [], np.zeros((k, width), dtype=np.int64)
    for i, line in enumerate(records):
        hx, sep, rest = line.partition("\t")
        if not sep:
            raise DatasetFormatError(f"line {i + 2}: missing TAB separator")
        vals = rest.split(" ")
        if len(vals) != width:
            raise DatasetFormatError(f"line {i + 2}: expected {width} targets, got {len(vals)}")
        try:
            targets[i] = [int(v) for v in vals]
        except ValueError:
            raise DatasetFormatError(f"line {i + 2}: non-integer target") from None
        hexes.append(hx)
    bits = _hex_to_rows(hexes, size, first_line=2)
    d = Dataset(n, h["task"], bits, targets, seed=h["seed"], split=h["split"])
    verify_targets(d, verify)
    return d


def load(path, verify: str | None = None) -> Dataset:
    if verify is None:
        verify = "full" if os.environ.get("BNL_VERIFY_FULL") == "1" else "spot"
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise DatasetFormatError(f"offset {e.start}: not UTF-8") from None
    return loads(text, verify=verify)


def verify_targets(d: Dataset, mode: str = "spot") -> None:
    """Recompute targets with the transform module: 'full', 'spot' (1%) or 'none'."""
    if mode == "none" or len(d) == 0:
        return
    if mode == "full":
        rows = np.arange(len(d))
    elif mode == "spot":
        rows = np.arange(0, len(d), 100)
    else:
        raise DatasetError(f"unknown verify mode {mode!r}")
    expect = compute_targets(d.bits[rows], d.task)
    bad = np.flatnonzero((expect != d.targets[rows]).any(axis=1))
    if bad.size:
        raise DatasetFormatError(f"line {int(rows[bad[0]]) + 2}: target does not match recomputed value")
