"""Preprocessing (equilibration + RCM), ILU(0), sparse LU and block solves."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import reverse_cuthill_mckee

from ..exceptions import FactorizationError
from ._kernels import KERNELS, OK
from .csr import CsrMatrix

BACKENDS = ("ILU0", "SparseLU")


def equilibrate(a: CsrMatrix, sweeps=5):
    """Iterative row/column max-norm scaling (Ruiz).

    Returns ``(dr, dc)`` such that ``diag(dr) a diag(dc)`` has every row
    and column max-abs entry close to one.
    """
    n_r, n_c = a.shape
    dr = np.ones(n_r)
    dc = np.ones(n_c)
    rows = a.row_ids()
    absval = np.abs(a.data)
    for _ in range(sweeps):
        scaled = absval * dr[rows] * dc[a.indices]
        rmax = np.zeros(n_r)
        np.maximum.at(rmax, rows, scaled)
        cmax = np.zeros(n_c)
        np.maximum.at(cmax, a.indices, scaled)
        rmax[rmax == 0] = 1.0
        cmax[cmax == 0] = 1.0
        dr /= np.sqrt(rmax)
        dc /= np.sqrt(cmax)
    return dr, dc


def rcm_ordering(a: CsrMatrix):
    """Reverse Cuthill-McKee permutation of the symmetrized pattern."""
    sp = a.to_scipy()
    pattern = (abs(sp) + abs(sp.T)).tocsr()
    return np.asarray(reverse_cuthill_mckee(pattern, symmetric_mode=True), dtype=np.int64)


@dataclass(frozen=True, eq=False)
class FactorizedBlock:
    """Factors of ``P diag(dr) A diag(dc) P^T = L U``.

    ``lower`` is strictly lower triangular with an implied unit diagonal;
    every row of ``upper`` starts with its diagonal entry.
    """

    kind: str
    n: int
    lower: CsrMatrix
    upper: CsrMatrix
    perm: np.ndarray
    row_scale: np.ndarray
    col_scale: np.ndarray

    @property
    def is_complex(self):
        return self.upper.is_complex

    @property
    def nnz(self):
        return self.lower.nnz + self.upper.nnz + self.n


def _preprocess(a: CsrMatrix, preprocess: bool):
    if a.nrows != a.ncols:
        raise ValueError(f"factorization needs a square matrix, got {a.shape}")
    if not preprocess:
        ident = np.arange(a.nrows)
        return a, ident, np.ones(a.nrows), np.ones(a.nrows)
    dr, dc = equilibrate(a)
    scaled = a.scale_rows_cols(dr, dc)
    perm = rcm_ordering(scaled)
    return scaled.permute(perm, perm), perm, dr, dc


def _split_lu(a: CsrMatrix, vals, diag):
    """Split an in-place ILU result into strict L and diagonal-first U."""
    rows = a.row_ids()
    lower = a.indices < rows
    l = CsrMatrix.from_arrays(a.nrows, a.ncols,
                              np.concatenate([[0], np.cumsum(np.bincount(rows[lower], minlength=a.nrows))]),
                              a.indices[lower], vals[lower], check=False)
    up = ~lower
    u = CsrMatrix.from_arrays(a.nrows, a.ncols,
                              np.concatenate([[0], np.cumsum(np.bincount(rows[up], minlength=a.nrows))]),
                              a.indices[up], vals[up], check=False)
    return l, u


def ilu0(a: CsrMatrix, preprocess=True, rel_pivot_tol=1e-14) -> FactorizedBlock:
    """Incomplete LU with zero fill on the (preprocessed) pattern of ``a``."""
    work, perm, dr, dc = _preprocess(a, preprocess)
    vals = work.data.copy()
    diag = np.zeros(work.nrows, dtype=np.int64)
    status = KERNELS["ilu0"](work.indptr, work.indices, vals, diag, rel_pivot_tol)
    if status != OK:
        raise FactorizationError(
            f"ILU(0) breakdown: zero or tiny pivot in row {status} (original row {perm[status]})",
            row=int(perm[status]))
    lower, upper = _split_lu(work, vals, diag)
    return FactorizedBlock("ILU0", a.nrows, lower, upper, perm, dr, dc)


def sparse_lu(a: CsrMatrix, preprocess=True, rel_pivot_tol=1e-14) -> FactorizedBlock:
    """Exact LU (no pivoting) after equilibration and RCM reordering."""
    work, perm, dr, dc = _preprocess(a, preprocess)
    status, lp, li, lv, up, ui, uv = KERNELS["lu"](work.indptr, work.indices, work.data, rel_pivot_tol)
    if status != OK:
        raise FactorizationError(
            f"sparse LU breakdown: pivot in row {status} (original row {perm[status]}) is singular",
            row=int(perm[status]))
    n = a.nrows
    lower = CsrMatrix.from_arrays(n, n, lp, li, lv, check=False)
    upper = CsrMatrix.from_arrays(n, n, up, ui, uv, check=False)
    return FactorizedBlock("SparseLU", n, lower, upper, perm, dr, dc)


def factorize(a: CsrMatrix, backend: str, **kw) -> FactorizedBlock:
    if backend == "ILU0":
        return ilu0(a, **kw)
    if backend == "SparseLU":
        return sparse_lu(a, **kw)
    raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")


def _solve_same_kind(f: FactorizedBlock, b):
    dtype = f.upper.dtype
    rhs = (f.row_scale * b)[f.perm].astype(dtype, copy=False)
    z = np.empty(f.n, dtype=dtype)
    KERNELS["lower_unit_solve"](f.lower.indptr, f.lower.indices, f.lower.data, rhs, z)
    y = np.empty(f.n, dtype=dtype)
    KERNELS["upper_solve"](f.upper.indptr, f.upper.indices, f.upper.data, z, y)
    x = np.empty_like(y)
    x[f.perm] = y
    return f.col_scale * x


def block_solve(f: FactorizedBlock, b):
    """Solve ``A x = b`` with the factors of ``A`` (exact or incomplete)."""
    b = np.asarray(b)
    if b.shape != (f.n,):
        raise ValueError(f"right-hand side has shape {b.shape}, expected ({f.n},)")
    if np.iscomplexobj(b) and not f.is_complex:
        return _solve_same_kind(f, b.real) + 1j * _solve_same_kind(f, b.imag)
    return _solve_same_kind(f, b)
