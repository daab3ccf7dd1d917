"""Compare the numba and pure-numpy kernels on identical inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json]

Both implementations are imported directly, so the BNL_DISABLE_NUMBA flag
does not matter here.  Each result is checked for equality before timing.
"""

from __future__ import annotations

import argparse
import json
import timeit

import numpy as np

from boolnl import _kernels as K
from boolnl.boolfn import affine_tables


def cases(rng):
    for n in (6, 10, 14):
        bits = rng.integers(0, 2, size=(max(1, (1 << 16) >> n), 1 << n)).astype(np.int64)
        yield f"fwt_rows n={n}", K.fwt_rows_np, K.fwt_rows_nb, lambda b=bits: (1 - 2 * b,)
        yield f"mobius_rows n={n}", K.mobius_rows_np, K.mobius_rows_nb, lambda b=bits: (b.astype(np.uint8),)
    for n in (4, 6):
        bits = rng.integers(0, 2, size=(20000, 1 << n)).astype(np.uint8)
        aff = affine_tables(n)
        yield f"affine_min_distance n={n}", K.affine_min_distance_np, K.affine_min_distance_nb, \
            lambda b=bits, a=aff: (b, a)
    width = 256
    basis = np.zeros((width, width), dtype=np.int64)
    pivots = np.arange(width, dtype=np.int64)
    basis[:, :] = np.triu(rng.integers(0, K.MODP, size=(width, width)))
    basis[pivots, pivots] = 1
    v = rng.integers(-1, 2, size=width).astype(np.int64)
    yield "modp_reduce width=256", K.modp_reduce_np, K.modp_reduce_nb, \
        lambda: (basis, pivots, width - 1, v, K.MODP)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    rows = []
    for name, f_np, f_nb, make in cases(rng):
        a, b = f_np(*(x.copy() if isinstance(x, np.ndarray) else x for x in make())), \
            f_nb(*(x.copy() if isinstance(x, np.ndarray) else x for x in make()))
        if not np.array_equal(a, b):
            raise SystemExit(f"{name}: numba and numpy results differ")

        def best(fn):
            inputs = make()
            return min(timeit.repeat(
                lambda: fn(*(x.copy() if isinstance(x, np.ndarray) else x for x in inputs)),
                number=1, repeat=args.repeat))

        t_np, t_nb = best(f_np), best(f_nb)
        rows.append({"kernel": name, "numpy_s": t_np, "numba_s": t_nb, "speedup": t_np / t_nb})
    if args.json:
        for r in rows:
            print(json.dumps(r))
        return
    print(f"numba available: {K.HAVE_NUMBA}; default backend: {K.backend()}")
    print(f"{'kernel':<28}{'numpy (s)':>12}{'numba (s)':>12}{'speedup':>10}")
    for r in rows:
        print(f"{r['kernel']:<28}{r['numpy_s']:>12.5f}{r['numba_s']:>12.5f}{r['speedup']:>9.1f}x")


if __name__ == "__main__":
    main()
