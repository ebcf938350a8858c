"""Hot CSR loops: SpMV, pattern union, ILU(0), envelope LU, triangular solves.

Each kernel exists twice: a loop version compiled with numba and a
vectorized numpy version used when numba is disabled.  ``KERNELS`` maps a
name to the active implementation; ``NUMBA_KERNELS`` / ``NUMPY_KERNELS``
expose both sets for benchmarking.
"""
import numpy as np

from .._jit import USE_NUMBA, njit

OK = -1


# --------------------------------------------------------------------- spmv

@njit
def _spmv_nb(indptr, indices, data, x, y):
    for i in range(indptr.shape[0] - 1):
        y[i] = 0
        acc = y[i]
        for jj in range(indptr[i], indptr[i + 1]):
            acc += data[jj] * x[indices[jj]]
        y[i] = acc


def _spmv_np(indptr, indices, data, x, y):
    prod = data * x[indices]
    starts = indptr[:-1]
    nonempty = starts < indptr[1:]
    y[:] = 0
    if prod.size:
        y[nonempty] = np.add.reduceat(prod, starts[nonempty])


# ------------------------------------------------------------------ combine

@njit
def _union_count_nb(ap, ai, bp, bi, out_ptr):
    n = ap.shape[0] - 1
    out_ptr[0] = 0
    for i in range(n):
        p, q, cnt = ap[i], bp[i], 0
        while p < ap[i + 1] or q < bp[i + 1]:
            if q >= bp[i + 1] or (p < ap[i + 1] and ai[p] < bi[q]):
                p += 1
            elif p >= ap[i + 1] or bi[q] < ai[p]:
                q += 1
            else:
                p += 1
                q += 1
            cnt += 1
        out_ptr[i + 1] = out_ptr[i] + cnt


@njit
def _union_fill_nb(ap, ai, ax, alpha, bp, bi, bx, beta, out_ptr, out_idx, out_val):
    n = ap.shape[0] - 1
    for i in range(n):
        p, q, k = ap[i], bp[i], out_ptr[i]
        while p < ap[i + 1] or q < bp[i + 1]:
            if q >= bp[i + 1] or (p < ap[i + 1] and ai[p] < bi[q]):
                out_idx[k] = ai[p]
                out_val[k] = alpha * ax[p]
                p += 1
            elif p >= ap[i + 1] or bi[q] < ai[p]:
                out_idx[k] = bi[q]
                out_val[k] = beta * bx[q]
                q += 1
            else:
                out_idx[k] = ai[p]
                out_val[k] = alpha * ax[p] + beta * bx[q]
                p += 1
                q += 1
            k += 1


def _combine_nb(ap, ai, ax, alpha, bp, bi, bx, beta, dtype):
    n = ap.shape[0] - 1
    out_ptr = np.empty(n + 1, dtype=np.int64)
    _union_count_nb(ap, ai, bp, bi, out_ptr)
    out_idx = np.empty(out_ptr[-1], dtype=np.int64)
    out_val = np.empty(out_ptr[-1], dtype=dtype)
    _union_fill_nb(ap, ai, ax.astype(dtype), dtype(alpha), bp, bi, bx.astype(dtype), dtype(beta),
                   out_ptr, out_idx, out_val)
    return out_ptr, out_idx, out_val


def coo_to_csr_arrays(rows, cols, vals, nrows):
    """Sort COO triplets row-major and sum duplicates."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals)
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if rows.size:
        first = np.ones(rows.size, dtype=bool)
        first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        starts = np.flatnonzero(first)
        vals = np.add.reduceat(vals, starts)
        rows, cols = rows[starts], cols[starts]
    indptr = np.zeros(nrows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=nrows), out=indptr[1:])
    return indptr, cols, vals


def _combine_np(ap, ai, ax, alpha, bp, bi, bx, beta, dtype):
    n = ap.shape[0] - 1
    ra = np.repeat(np.arange(n), np.diff(ap))
    rb = np.repeat(np.arange(n), np.diff(bp))
    vals = np.concatenate([dtype(alpha) * ax.astype(dtype), dtype(beta) * bx.astype(dtype)])
    return coo_to_csr_arrays(np.concatenate([ra, rb]), np.concatenate([ai, bi]), vals, n)


# -------------------------------------------------------------------- ILU(0)

@njit
def _ilu0_nb(indptr, indices, vals, diag, rel_tol):
    """In-place ILU(0) on a CSR pattern (IKJ).  Returns failing row or -1."""
    n = indptr.shape[0] - 1
    pos = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        d = -1
        rmax = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            pos[indices[jj]] = jj
            if indices[jj] == i:
                d = jj
            if abs(vals[jj]) > rmax:
                rmax = abs(vals[jj])
        if d < 0:
            return i
        for jj in range(indptr[i], d):
            k = indices[jj]
            lik = vals[jj] / vals[diag[k]]
            vals[jj] = lik
            for pp in range(diag[k] + 1, indptr[k + 1]):
                q = pos[indices[pp]]
                if q >= 0:
                    vals[q] -= lik * vals[pp]
        diag[i] = d
        for jj in range(indptr[i], indptr[i + 1]):
            pos[indices[jj]] = -1
        if not abs(vals[d]) > rel_tol * rmax:
            return i
    return OK


def _ilu0_np(indptr, indices, vals, diag, rel_tol):
    n = indptr.shape[0] - 1
    pos = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        lo, hi = indptr[i], indptr[i + 1]
        cols = indices[lo:hi]
        hit = np.flatnonzero(cols == i)
        if hit.size == 0:
            return i
        d = lo + hit[0]
        rmax = np.abs(vals[lo:hi]).max()
        pos[cols] = np.arange(lo, hi)
        for jj in range(lo, d):
            k = indices[jj]
            vals[jj] = vals[jj] / vals[diag[k]]
            ucols = indices[diag[k] + 1:indptr[k + 1]]
            q = pos[ucols]
            m = q >= 0
            vals[q[m]] -= vals[jj] * vals[diag[k] + 1:indptr[k + 1]][m]
        diag[i] = d
        pos[cols] = -1
        if not abs(vals[d]) > rel_tol * rmax:
            return i
    return OK


# ------------------------------------------------------------- envelope LU

@njit
def _grow(idx, val, need):
    cap = max(2 * idx.shape[0], need)
    nidx = np.empty(cap, dtype=idx.dtype)
    nval = np.empty(cap, dtype=val.dtype)
    nidx[:idx.shape[0]] = idx
    nval[:val.shape[0]] = val
    return nidx, nval


@njit
def _lu_nb(indptr, indices, data, rel_tol):
    """Row-wise (up-looking) LU without pivoting.

    Fill in row i is confined to columns >= the row's first nonzero, so a
    scan over that window visits the eliminated columns in order.  Returns
    (status, L arrays, U arrays) with L strictly lower (unit implied) and
    the diagonal stored first in every U row.
    """
    n = indptr.shape[0] - 1
    w = np.zeros(n, dtype=data.dtype)
    flag = np.full(n, -1, dtype=np.int64)
    upper = np.empty(n, dtype=np.int64)
    cap = max(4 * data.shape[0], 16)
    l_ptr = np.zeros(n + 1, dtype=np.int64)
    u_ptr = np.zeros(n + 1, dtype=np.int64)
    l_idx = np.empty(cap, dtype=np.int64)
    l_val = np.empty(cap, dtype=data.dtype)
    u_idx = np.empty(cap, dtype=np.int64)
    u_val = np.empty(cap, dtype=data.dtype)
    nl = 0
    nu = 0
    for i in range(n):
        if nl + i > l_idx.shape[0]:
            l_idx, l_val = _grow(l_idx, l_val, nl + i)
        if nu + n - i > u_idx.shape[0]:
            u_idx, u_val = _grow(u_idx, u_val, nu + n - i)
        lo = i
        nup = 0
        rmax = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            j = indices[jj]
            w[j] = data[jj]
            flag[j] = i
            if abs(data[jj]) > rmax:
                rmax = abs(data[jj])
            if j < lo:
                lo = j
            if j >= i:
                upper[nup] = j
                nup += 1
        for k in range(lo, i):
            if flag[k] != i:
                continue
            lik = w[k] / u_val[u_ptr[k]]
            l_idx[nl] = k
            l_val[nl] = lik
            nl += 1
            for pp in range(u_ptr[k] + 1, u_ptr[k + 1]):
                j = u_idx[pp]
                if flag[j] != i:
                    flag[j] = i
                    w[j] = 0
                    if j >= i:
                        upper[nup] = j
                        nup += 1
                w[j] -= lik * u_val[pp]
        l_ptr[i + 1] = nl
        if flag[i] != i or not abs(w[i]) > rel_tol * rmax:
            return i, l_ptr, l_idx[:nl], l_val[:nl], u_ptr, u_idx[:nu], u_val[:nu]
        cols = np.sort(upper[:nup])
        for t in range(nup):
            u_idx[nu] = cols[t]
            u_val[nu] = w[cols[t]]
            nu += 1
        u_ptr[i + 1] = nu
    return OK, l_ptr, l_idx[:nl], l_val[:nl], u_ptr, u_idx[:nu], u_val[:nu]


def _lu_np(indptr, indices, data, rel_tol):
    n = indptr.shape[0] - 1
    w = np.zeros(n, dtype=data.dtype)
    live = np.zeros(n, dtype=bool)
    l_ptr = np.zeros(n + 1, dtype=np.int64)
    u_ptr = np.zeros(n + 1, dtype=np.int64)
    l_rows = []
    u_cols_of, u_vals_of = [], []
    for i in range(n):
        cols = indices[indptr[i]:indptr[i + 1]]
        vals = data[indptr[i]:indptr[i + 1]]
        rmax = np.abs(vals).max() if vals.size else 0.0
        lo = cols.min() if cols.size else i
        w[cols] = vals
        live[cols] = True
        lk, lv = [], []
        for k in range(lo, i):
            if not live[k]:
                continue
            lik = w[k] / u_vals_of[k][0]
            lk.append(k)
            lv.append(lik)
            uc = u_cols_of[k][1:]
            w[uc] -= lik * u_vals_of[k][1:]
            live[uc] = True
        l_rows.append((np.array(lk, dtype=np.int64), np.array(lv, dtype=data.dtype)))
        l_ptr[i + 1] = l_ptr[i] + len(lk)
        touched = np.flatnonzero(live)
        if not live[i] or not abs(w[i]) > rel_tol * rmax:
            w[touched] = 0
            live[touched] = False
            return (i, l_ptr, np.zeros(0, np.int64), np.zeros(0, data.dtype),
                    u_ptr, np.zeros(0, np.int64), np.zeros(0, data.dtype))
        ucols = touched[touched >= i]
        u_cols_of.append(ucols)
        u_vals_of.append(w[ucols].copy())
        u_ptr[i + 1] = u_ptr[i] + ucols.size
        w[touched] = 0
        live[touched] = False
    l_idx = np.concatenate([r[0] for r in l_rows]) if n else np.zeros(0, np.int64)
    l_val = np.concatenate([r[1] for r in l_rows]) if n else np.zeros(0, data.dtype)
    u_idx = np.concatenate(u_cols_of) if n else np.zeros(0, np.int64)
    u_val = np.concatenate(u_vals_of) if n else np.zeros(0, data.dtype)
    return OK, l_ptr, l_idx, l_val, u_ptr, u_idx, u_val


# --------------------------------------------------------- triangular solves

@njit
def _lower_unit_solve_nb(indptr, indices, data, b, x):
    for i in range(indptr.shape[0] - 1):
        acc = b[i]
        for jj in range(indptr[i], indptr[i + 1]):
            acc -= data[jj] * x[indices[jj]]
        x[i] = acc


@njit
def _upper_solve_nb(indptr, indices, data, b, x):
    """Backward solve; the diagonal is the first entry of each row."""
    for i in range(indptr.shape[0] - 2, -1, -1):
        d = indptr[i]
        acc = b[i]
        for jj in range(d + 1, indptr[i + 1]):
            acc -= data[jj] * x[indices[jj]]
        x[i] = acc / data[d]


def _lower_unit_solve_np(indptr, indices, data, b, x):
    for i in range(indptr.shape[0] - 1):
        lo, hi = indptr[i], indptr[i + 1]
        x[i] = b[i] - data[lo:hi] @ x[indices[lo:hi]]


def _upper_solve_np(indptr, indices, data, b, x):
    for i in range(indptr.shape[0] - 2, -1, -1):
        d, hi = indptr[i], indptr[i + 1]
        x[i] = (b[i] - data[d + 1:hi] @ x[indices[d + 1:hi]]) / data[d]


NUMBA_KERNELS = dict(spmv=_spmv_nb, combine=_combine_nb, ilu0=_ilu0_nb, lu=_lu_nb,
                     lower_unit_solve=_lower_unit_solve_nb, upper_solve=_upper_solve_nb)
NUMPY_KERNELS = dict(spmv=_spmv_np, combine=_combine_np, ilu0=_ilu0_np, lu=_lu_np,
                     lower_unit_solve=_lower_unit_solve_np, upper_solve=_upper_solve_np)
KERNELS = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS
