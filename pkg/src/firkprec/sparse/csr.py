"""Compressed sparse row matrices over float64 or complex128."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from ._kernels import KERNELS, coo_to_csr_arrays


def _scalar_dtype(*arrays_or_scalars):
    return np.complex128 if any(np.iscomplexobj(v) for v in arrays_or_scalars) else np.float64


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """CSR matrix with sorted, duplicate-free column indices per row.

    ``identity`` marks a matrix known to be the identity so that mass
    solves and products can be skipped.
    """

    nrows: int
    ncols: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    identity: bool = False

    def __post_init__(self):
        for name in ("indptr", "indices", "data"):
            getattr(self, name).setflags(write=False)

    @classmethod
    def from_arrays(cls, nrows, ncols, indptr, indices, data, check=True, identity=False):
        # private copies: the arrays are frozen below
        indptr = np.array(indptr, dtype=np.int64)
        indices = np.array(indices, dtype=np.int64)
        data = np.array(data, dtype=_scalar_dtype(data))
        m = cls(int(nrows), int(ncols), indptr, indices, data, identity)
        if check:
            m.validate()
        return m

    @classmethod
    def from_coo(cls, rows, cols, vals, shape):
        """Build from triplets; duplicates are summed."""
        vals = np.asarray(vals, dtype=_scalar_dtype(vals))
        indptr, indices, data = coo_to_csr_arrays(rows, cols, vals, shape[0])
        return cls.from_arrays(shape[0], shape[1], indptr, indices, data)

    @classmethod
    def from_dense(cls, a, drop_zeros=True):
        a = np.asarray(a)
        rows, cols = np.nonzero(a) if drop_zeros else np.indices(a.shape).reshape(2, -1)
        return cls.from_coo(rows, cols, a[rows, cols], a.shape)

    @classmethod
    def eye(cls, n, flag=True):
        ar = np.arange(n)
        return cls.from_arrays(n, n, np.arange(n + 1), ar, np.ones(n), identity=flag)

    @classmethod
    def from_scipy(cls, sp):
        sp = sp.tocsr()
        sp.sum_duplicates()
        sp.sort_indices()
        return cls.from_arrays(sp.shape[0], sp.shape[1], sp.indptr, sp.indices, sp.data)

    def to_scipy(self):
        import scipy.sparse as sps
        return sps.csr_matrix((self.data, self.indices, self.indptr), shape=self.shape)

    def validate(self):
        ip, ix = self.indptr, self.indices
        if ip.shape != (self.nrows + 1,) or ip[0] != 0 or ip[-1] != ix.size or ix.size != self.data.size:
            raise ValueError("inconsistent CSR array lengths")
        if np.any(np.diff(ip) < 0):
            raise ValueError("row offsets must be nondecreasing")
        if ix.size and (ix.min() < 0 or ix.max() >= self.ncols):
            raise ValueError("column index out of range")
        if ix.size > 1:
            step = np.diff(ix)
            row_start = np.zeros(ix.size, dtype=bool)
            row_start[ip[1:-1][ip[1:-1] < ix.size]] = True
            if np.any((step <= 0) & ~row_start[1:]):
                raise ValueError("column indices must be strictly increasing within each row")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("matrix has non-finite values")
        return self

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def nnz(self):
        return int(self.indices.size)

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_complex(self):
        return np.iscomplexobj(self.data)

    def row_ids(self):
        return np.repeat(np.arange(self.nrows), np.diff(self.indptr))

    def toarray(self):
        out = np.zeros(self.shape, dtype=self.dtype)
        out[self.row_ids(), self.indices] = self.data
        return out

    def astype(self, dtype):
        return CsrMatrix(self.nrows, self.ncols, self.indptr, self.indices,
                         self.data.astype(dtype), self.identity)

    def conj(self):
        if not self.is_complex:
            return self
        return CsrMatrix(self.nrows, self.ncols, self.indptr, self.indices, self.data.conj(), self.identity)

    def scale(self, alpha):
        return CsrMatrix.from_arrays(self.nrows, self.ncols, self.indptr, self.indices,
                                     alpha * self.data, check=False,
                                     identity=self.identity and alpha == 1)

    def transpose(self):
        return CsrMatrix.from_coo(self.indices, self.row_ids(), self.data, (self.ncols, self.nrows))

    def permute(self, row_perm, col_perm):
        """``B[i, j] = A[row_perm[i], col_perm[j]]``."""
        inv_c = np.empty(self.ncols, dtype=np.int64)
        inv_c[np.asarray(col_perm)] = np.arange(self.ncols)
        inv_r = np.empty(self.nrows, dtype=np.int64)
        inv_r[np.asarray(row_perm)] = np.arange(self.nrows)
        return CsrMatrix.from_coo(inv_r[self.row_ids()], inv_c[self.indices], self.data, self.shape)

    def scale_rows_cols(self, dr, dc):
        """``diag(dr) A diag(dc)``."""
        return CsrMatrix.from_arrays(self.nrows, self.ncols, self.indptr, self.indices,
                                     self.data * dr[self.row_ids()] * dc[self.indices], check=False)

    def diagonal(self):
        out = np.zeros(min(self.shape), dtype=self.dtype)
        rows = self.row_ids()
        on = rows == self.indices
        out[rows[on]] = self.data[on]
        return out

    def bandwidth(self):
        if self.nnz == 0:
            return 0
        return int(np.abs(self.row_ids() - self.indices).max())

    def __matmul__(self, x):
        return spmv(self, x)


def spmv(a: CsrMatrix, x):
    """``y = a @ x`` for a vector ``x`` (real or complex)."""
    x = np.asarray(x)
    if x.shape != (a.ncols,):
        raise ValueError(f"dimension mismatch: matrix {a.shape}, vector {x.shape}")
    if a.identity:
        return x.copy()
    dtype = _scalar_dtype(a.data, x)
    y = np.empty(a.nrows, dtype=dtype)
    KERNELS["spmv"](a.indptr, a.indices, a.data.astype(dtype, copy=False),
                    np.ascontiguousarray(x, dtype=dtype), y)
    return y


def combine(alpha, m: CsrMatrix, beta, k: CsrMatrix) -> CsrMatrix:
    """``alpha * m + beta * k`` on the union pattern."""
    if m.shape != k.shape:
        raise ValueError(f"shape mismatch {m.shape} vs {k.shape}")
    dtype = _scalar_dtype(m.data, k.data, alpha, beta)
    ip, ix, vals = KERNELS["combine"](m.indptr, m.indices, m.data, alpha,
                                      k.indptr, k.indices, k.data, beta, dtype)
    return CsrMatrix.from_arrays(m.nrows, m.ncols, ip, ix, vals, check=False,
                                 identity=m.identity and alpha == 1 and beta == 0)


def block_2x2(a11: CsrMatrix, a12: CsrMatrix, a21: CsrMatrix, a22: CsrMatrix) -> CsrMatrix:
    """Stack four n x n blocks into a 2n x 2n matrix."""
    n = a11.nrows
    rows, cols, vals = [], [], []
    for blk, (ro, co) in zip((a11, a12, a21, a22), ((0, 0), (0, n), (n, 0), (n, n))):
        rows.append(blk.row_ids() + ro)
        cols.append(blk.indices + co)
        vals.append(blk.data)
    dtype = _scalar_dtype(*vals)
    return CsrMatrix.from_coo(np.concatenate(rows), np.concatenate(cols),
                              np.concatenate([v.astype(dtype) for v in vals]), (2 * n, 2 * n))


def read_matrix_market(path) -> CsrMatrix:
    """Load a Matrix Market coordinate file (real or complex)."""
    import scipy.io
    import scipy.sparse as sps
    return CsrMatrix.from_scipy(sps.csr_matrix(scipy.io.mmread(path)))


def write_matrix_market(path, a: CsrMatrix, comment=""):
    import scipy.io
    scipy.io.mmwrite(path, a.to_scipy(), comment=comment)


def load_mk_pair(m_path, k_path, sidecar=None):
    """Read ``(M, K)`` and optional JSON metadata.

    The sidecar defaults to ``<k_path>.json`` when present and may carry
    ``dof``, ``symmetric_mass`` and ``source``.  A mass matrix equal to the
    identity is flagged so that mass products are skipped.
    """
    m = read_matrix_market(m_path)
    k = read_matrix_market(k_path)
    if m.shape != k.shape or m.nrows != m.ncols:
        raise ValueError(f"M {m.shape} and K {k.shape} must be square and conforming")
    meta = {}
    side = sidecar or (str(k_path) + ".json")
    if os.path.exists(side):
        with open(side) as fh:
            meta = json.load(fh)
        if "dof" in meta and int(meta["dof"]) != m.nrows:
            raise ValueError(f"sidecar dof {meta['dof']} does not match matrix size {m.nrows}")
    if m.nnz == m.nrows and np.array_equal(m.indices, np.arange(m.nrows)) and np.all(m.data == 1):
        m = CsrMatrix.eye(m.nrows)
    return m, k, meta
