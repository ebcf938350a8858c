"""Time the numba kernels against their numpy twins on FDM stage blocks.

Usage: python benchmarks/bench_kernels.py [--n 15] [--order 2] [--repeat 5]

Both kernel sets are imported side by side, so a single process compares
them regardless of the FIRKPREC_DISABLE_NUMBA setting.  The first numba
call (compilation) is excluded from the timings.
"""
import argparse
import time

import numpy as np

from firkprec import factory as fa
from firkprec import smalldense as sd
from firkprec.discretize import Grid3D, PdeCoeffs, assemble_fdm
from firkprec.sparse import CsrMatrix, combine
from firkprec.sparse import _kernels as kern
from firkprec.sparse.factor import _preprocess


def best_of(fn, repeat):
    out = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        out = min(out, time.perf_counter() - t0)
    return out


def sparse_cases(a):
    n = a.nrows
    x = np.random.default_rng(0).standard_normal(n)

    def spmv(ks):
        y = np.empty(n)
        return lambda: ks["spmv"](a.indptr, a.indices, a.data, x, y)

    def ilu(ks):
        def run():
            vals = a.data.copy()
            ks["ilu0"](a.indptr, a.indices, vals, np.zeros(n, dtype=np.int64), 1e-14)
        return run

    def lu(ks):
        return lambda: ks["lu"](a.indptr, a.indices, a.data, 1e-14)

    _, lp, li, lv, up, ui, uv = kern.NUMBA_KERNELS["lu"](a.indptr, a.indices, a.data, 1e-14)

    def trisolve(ks):
        def run():
            z, y = np.empty(n), np.empty(n)
            ks["lower_unit_solve"](lp, li, lv, x, z)
            ks["upper_solve"](up, ui, uv, z, y)
        return run

    def comb(ks):
        return lambda: ks["combine"](a.indptr, a.indices, a.data, 1.0, a.indptr, a.indices,
                                     a.data, 0.5, np.float64)

    return {"spmv": spmv, "combine": comb, "ilu0": ilu, "lu": lu, "tri_solve": trisolve}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=15)
    ap.add_argument("--order", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-lu-numpy", action="store_true", help="the numpy LU is slow for n > 15")
    args = ap.parse_args(argv)

    k = assemble_fdm(Grid3D(args.n), PdeCoeffs(), p=args.order)
    block = combine(1.0, CsrMatrix.eye(k.nrows), 0.25 * 0.2, k)
    a, *_ = _preprocess(block, True)
    print(f"FDM block: n={args.n}^3 = {a.nrows} rows, nnz={a.nnz}, order {args.order}")
    print(f"{'kernel':<12}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, make in sparse_cases(a).items():
        fast = make(kern.NUMBA_KERNELS)
        fast()  # compile
        t_nb = best_of(fast, args.repeat)
        if name == "lu" and args.skip_lu_numpy:
            print(f"{name:<12}{t_nb * 1e3:>12.2f}{'skipped':>12}")
            continue
        t_np = best_of(make(kern.NUMPY_KERNELS), max(1, args.repeat // 2))
        print(f"{name:<12}{t_nb * 1e3:>12.2f}{t_np * 1e3:>12.2f}{t_np / t_nb:>10.1f}")

    # small dense kernel used by the singly-diagonal optimizer
    r = np.triu(fa.build_brsd(5).core) + 0.2 * np.eye(5)
    rinv = np.linalg.inv(r)
    x = np.random.default_rng(1).standard_normal(10)
    fa._sdut_step1(x, r, rinv, 1e-6)
    t_nb = best_of(lambda: [fa._sdut_step1(x, r, rinv, 1e-6) for _ in range(1000)], args.repeat)
    t_np = best_of(lambda: [fa._sdut_step1_np(x, r, rinv, 1e-6) for _ in range(1000)], args.repeat)
    print(f"{'sdut x1000':<12}{t_nb * 1e3:>12.2f}{t_np * 1e3:>12.2f}{t_np / t_nb:>10.1f}")
    w = np.random.default_rng(2).standard_normal((8, 8))
    sd._jacobi_orthogonalize(w.copy(), sd.EPS, 60)
    t_nb = best_of(lambda: [sd._jacobi_orthogonalize(w.copy(), sd.EPS, 60) for _ in range(200)], args.repeat)
    t_np = best_of(lambda: [sd._jacobi_orthogonalize_np(w.copy(), sd.EPS, 60) for _ in range(200)], args.repeat)
    print(f"{'jacobi x200':<12}{t_nb * 1e3:>12.2f}{t_np * 1e3:>12.2f}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
