"""Dense kernels for the s x s level (s <= 12).

Real Schur form by Householder reduction + Francis double-shift QR, block
reordering by adjacent swaps, complex Schur conversion, eigenvectors,
one-sided Jacobi SVD and a pivoted LU solve.  Everything here is plain
numpy: the matrices are tiny and the loops are not hot.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._jit import USE_NUMBA, njit
from .exceptions import ConvergenceError, ReorderError, SingularMatrixError

EPS = np.finfo(float).eps

ORDER_KEYS = ("desc-real", "asc-real", "asc-modulus", "desc-modulus")


@dataclass(frozen=True)
class SchurForm:
    """``a = q @ r @ q.T`` with ``r`` quasi-upper-triangular."""

    q: np.ndarray
    r: np.ndarray
    block_sizes: tuple = field(default=())

    @property
    def n(self):
        return self.r.shape[0]

    def block_starts(self):
        starts, k = [], 0
        for size in self.block_sizes:
            starts.append(k)
            k += size
        return starts

    def eigenvalues(self):
        """Eigenvalues in block order, ``+imag`` member of each pair first."""
        out = []
        for k, size in zip(self.block_starts(), self.block_sizes):
            out.extend(_block_eigs(self.r[k:k + size, k:k + size]))
        return np.array(out, dtype=complex)

    def reconstruct(self):
        return self.q @ self.r @ self.q.T


@dataclass(frozen=True)
class EigDecomp:
    x: np.ndarray
    lam: np.ndarray
    cond_x: float


def _as_square(a, dtype=float):
    a = np.array(a, dtype=dtype)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def _house(x):
    """Householder vector ``v`` and ``beta`` with ``(I - beta v v^T) x = -sign(x0)|x| e1``."""
    v = np.array(x, dtype=float)
    alpha = np.linalg.norm(v)
    if alpha == 0.0:
        return v, 0.0
    v[0] += math.copysign(alpha, v[0])
    return v, 2.0 / (v @ v)


def householder_qr(a):
    """Complete QR of a real (m x n) matrix, ``a = q @ r``."""
    r = np.array(a, dtype=float)
    m, n = r.shape
    q = np.eye(m)
    for k in range(min(m - 1, n)):
        v, beta = _house(r[k:, k])
        if beta == 0.0:
            continue
        r[k:, k:] -= beta * np.outer(v, v @ r[k:, k:])
        q[:, k:] -= beta * np.outer(q[:, k:] @ v, v)
        r[k + 1:, k] = 0.0
    return q, r


def hessenberg(a):
    """Orthogonal reduction ``a = q @ h @ q.T`` with ``h`` upper Hessenberg."""
    h = _as_square(a)
    n = h.shape[0]
    q = np.eye(n)
    for k in range(n - 2):
        v, beta = _house(h[k + 1:, k])
        if beta == 0.0:
            continue
        h[k + 1:, k:] -= beta * np.outer(v, v @ h[k + 1:, k:])
        h[:, k + 1:] -= beta * np.outer(h[:, k + 1:] @ v, v)
        q[:, k + 1:] -= beta * np.outer(q[:, k + 1:] @ v, v)
        h[k + 2:, k] = 0.0
    return h, q


def _lanv2(a, b, c, d):
    """Standardize a real 2x2 block (LAPACK dlanv2 convention).

    Returns ``(aa, bb, cc, dd), cs, sn`` with
    ``[[a, b], [c, d]] = G @ [[aa, bb], [cc, dd]] @ G.T`` and
    ``G = [[cs, -sn], [sn, cs]]``.  Either ``cc == 0`` (real pair) or
    ``aa == dd`` and ``bb * cc < 0``.
    """
    if c == 0.0:
        cs, sn = 1.0, 0.0
    elif b == 0.0:
        cs, sn = 0.0, 1.0
        a, d = d, a
        b, c = -c, 0.0
    elif a - d == 0.0 and math.copysign(1.0, b) != math.copysign(1.0, c):
        cs, sn = 1.0, 0.0
    else:
        temp = a - d
        p = 0.5 * temp
        bcmax = max(abs(b), abs(c))
        bcmis = min(abs(b), abs(c)) * math.copysign(1.0, b) * math.copysign(1.0, c)
        scale = max(abs(p), bcmax)
        z = (p / scale) * p + (bcmax / scale) * bcmis
        if z >= 4.0 * EPS:
            z = p + math.copysign(math.sqrt(scale) * math.sqrt(z), p)
            a = d + z
            d = d - (bcmax / z) * bcmis
            tau = math.hypot(c, z)
            cs, sn = z / tau, c / tau
            b, c = b - c, 0.0
        else:
            sigma = b + c
            tau = math.hypot(sigma, temp)
            cs = math.sqrt(0.5 * (1.0 + abs(sigma) / tau))
            sn = -(p / (tau * cs)) * math.copysign(1.0, sigma)
            aa, bb = a * cs + b * sn, -a * sn + b * cs
            cc, dd = c * cs + d * sn, -c * sn + d * cs
            a, b = aa * cs + cc * sn, bb * cs + dd * sn
            c, d = -aa * sn + cc * cs, -bb * sn + dd * cs
            temp = 0.5 * (a + d)
            a = d = temp
            if c != 0.0:
                if b != 0.0:
                    if math.copysign(1.0, b) == math.copysign(1.0, c):
                        sab, sac = math.sqrt(abs(b)), math.sqrt(abs(c))
                        p = math.copysign(sab * sac, c)
                        tau = 1.0 / math.sqrt(abs(b + c))
                        a, d = temp + p, temp - p
                        b, c = b - c, 0.0
                        cs1, sn1 = sab * tau, sac * tau
                        cs, sn = cs * cs1 - sn * sn1, cs * sn1 + sn * cs1
                else:
                    b, c = -c, 0.0
                    cs, sn = -sn, cs
    return (a, b, c, d), cs, sn


def _rotate_pair(h, q, k, g):
    """Similarity ``h <- P^T h P`` with ``P = diag(I, g, I)`` acting on rows/cols k, k+1."""
    h[k:k + 2, :] = g.T @ h[k:k + 2, :]
    h[:, k:k + 2] = h[:, k:k + 2] @ g
    q[:, k:k + 2] = q[:, k:k + 2] @ g


def _standardize(h, q, k):
    (aa, bb, cc, dd), cs, sn = _lanv2(h[k, k], h[k, k + 1], h[k + 1, k], h[k + 1, k + 1])
    g = np.array([[cs, -sn], [sn, cs]])
    _rotate_pair(h, q, k, g)
    h[k, k], h[k, k + 1], h[k + 1, k], h[k + 1, k + 1] = aa, bb, cc, dd


def _francis_step(h, q, lo, hi, ssum, prod):
    x = h[lo, lo] * h[lo, lo] + h[lo, lo + 1] * h[lo + 1, lo] - ssum * h[lo, lo] + prod
    y = h[lo + 1, lo] * (h[lo, lo] + h[lo + 1, lo + 1] - ssum)
    z = h[lo + 1, lo] * h[lo + 2, lo + 1]
    for k in range(lo, hi - 1):
        v, beta = _house(np.array([x, y, z]))
        if beta != 0.0:
            c0 = max(lo, k - 1)
            h[k:k + 3, c0:] -= beta * np.outer(v, v @ h[k:k + 3, c0:])
            r1 = min(k + 4, hi + 1)
            h[:r1, k:k + 3] -= beta * np.outer(h[:r1, k:k + 3] @ v, v)
            q[:, k:k + 3] -= beta * np.outer(q[:, k:k + 3] @ v, v)
        if k > lo:
            h[k + 1, k - 1] = 0.0
            h[k + 2, k - 1] = 0.0
        x = h[k + 1, k]
        y = h[k + 2, k]
        if k < hi - 2:
            z = h[k + 3, k]
    v, beta = _house(np.array([x, y]))
    if beta != 0.0:
        k = hi - 1
        c0 = max(lo, k - 1)
        h[k:k + 2, c0:] -= beta * np.outer(v, v @ h[k:k + 2, c0:])
        h[:hi + 1, k:k + 2] -= beta * np.outer(h[:hi + 1, k:k + 2] @ v, v)
        q[:, k:k + 2] -= beta * np.outer(q[:, k:k + 2] @ v, v)
        if k > lo:
            h[k + 1, k - 1] = 0.0


def _block_sizes(r):
    n = r.shape[0]
    sizes, k = [], 0
    while k < n:
        if k + 1 < n and r[k + 1, k] != 0.0:
            sizes.append(2)
            k += 2
        else:
            sizes.append(1)
            k += 1
    return tuple(sizes)


def _block_eigs(b):
    if b.shape[0] == 1:
        return [complex(b[0, 0])]
    a, g, be, d = b[0, 0], b[0, 1], b[1, 0], b[1, 1]
    mean = 0.5 * (a + d)
    disc = (0.5 * (a - d)) ** 2 + g * be
    if disc >= 0.0:
        rt = math.sqrt(disc)
        return [complex(mean + rt), complex(mean - rt)]
    im = math.sqrt(-disc)
    return [complex(mean, im), complex(mean, -im)]


def _fix_signs(q, r):
    """Flip Q columns so each one's first nonzero entry is positive."""
    n = q.shape[0]
    d = np.ones(n)
    for j in range(n):
        col = q[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-14)
        if nz.size and col[nz[0]] < 0.0:
            d[j] = -1.0
    return q * d, r * np.outer(d, d)


def _finish(q, r):
    """Zero everything below the block diagonal and package the result."""
    sizes = _block_sizes(r)
    mask = np.zeros_like(r, dtype=bool)
    k = 0
    for size in sizes:
        mask[k + size:, k:k + size] = True
        k += size
    r = np.where(mask, 0.0, r)
    q, r = _fix_signs(q, r)
    return SchurForm(q=q, r=r, block_sizes=sizes)


def real_schur(a, max_its=30):
    """Real Schur form ``a = q r q^T``.

    ``max_its`` bounds the QR sweeps spent on any single eigenvalue; an
    exceptional shift is used every 10 stalled sweeps.
    """
    h, q = hessenberg(a)
    n = h.shape[0]
    hnorm = max(np.abs(h).max(), np.finfo(float).tiny)
    hi, its = n - 1, 0
    while hi >= 0:
        lo = hi
        while lo > 0:
            scale = abs(h[lo - 1, lo - 1]) + abs(h[lo, lo])
            if scale == 0.0:
                scale = hnorm
            if abs(h[lo, lo - 1]) <= EPS * scale:
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            hi -= 1
            its = 0
            continue
        if lo == hi - 1:
            _standardize(h, q, lo)
            hi -= 2
            its = 0
            continue
        if its >= max_its:
            raise ConvergenceError(
                f"Francis QR did not converge after {max_its} sweeps (active window {lo}..{hi})")
        its += 1
        if its % 10 == 0:
            s = abs(h[hi, hi - 1]) + abs(h[hi - 1, hi - 2])
            ssum, prod = 1.5 * s, s * s
        else:
            ssum = h[hi - 1, hi - 1] + h[hi, hi]
            prod = h[hi - 1, hi - 1] * h[hi, hi] - h[hi - 1, hi] * h[hi, hi - 1]
        _francis_step(h, q, lo, hi, ssum, prod)
    return _finish(q, h)


def _order_key(key):
    if key == "desc-real":
        return lambda z: -z.real
    if key == "asc-real":
        return lambda z: z.real
    if key == "asc-modulus":
        return lambda z: abs(z)
    if key == "desc-modulus":
        return lambda z: -abs(z)
    raise ValueError(f"unknown ordering key {key!r}; expected one of {ORDER_KEYS}")


def _swap_blocks(r, q, k, p, qq):
    """Exchange the adjacent diagonal blocks ``r[k:k+p]`` and ``r[k+p:k+p+qq]``."""
    a11 = r[k:k + p, k:k + p]
    a12 = r[k:k + p, k + p:k + p + qq]
    a22 = r[k + p:k + p + qq, k + p:k + p + qq]
    # A11 X - X A22 = -A12, column-major vec
    kmat = np.kron(np.eye(qq), a11) - np.kron(a22.T, np.eye(p))
    rhs = -a12.reshape(-1, order="F")
    scale = max(np.abs(r).max(), np.finfo(float).tiny)
    try:
        x = dense_lu_solve(kmat, rhs, rel_pivot_tol=1e-12).reshape(p, qq, order="F")
    except SingularMatrixError as exc:
        raise ReorderError(f"block swap at {k}: blocks share eigenvalues") from exc
    stacked = np.vstack([x, np.eye(qq)])
    g, _ = householder_qr(stacked)
    m = p + qq
    sl = slice(k, k + m)
    r[sl, :] = g.T @ r[sl, :]
    r[:, sl] = r[:, sl] @ g
    q[:, sl] = q[:, sl] @ g
    resid = np.abs(r[k + qq:k + m, k:k + qq]).max()
    if resid > 1e3 * EPS * scale:
        raise ReorderError(f"block swap at {k} left a residual of {resid:.3e}")
    r[k + qq:k + m, k:k + qq] = 0.0
    if qq == 2:
        _standardize(r, q, k)
    if p == 2:
        _standardize(r, q, k + qq)


def reorder_schur(sf: SchurForm, key: str) -> SchurForm:
    """Bubble the diagonal blocks into the order given by ``key``.

    Ties keep their relative order.  A block whose key is within a relative
    1e-12 of its neighbour's is never moved, so an already sorted form
    comes back unchanged.
    """
    rank = _order_key(key)
    r = sf.r.copy()
    q = sf.q.copy()
    scale = max(np.abs(r).max(), 1.0)
    n = r.shape[0]
    for _ in range(n * n):
        sizes = _block_sizes(r)
        moved = False
        k = 0
        for b in range(len(sizes) - 1):
            p, qq = sizes[b], sizes[b + 1]
            left = rank(_block_eigs(r[k:k + p, k:k + p])[0])
            right = rank(_block_eigs(r[k + p:k + p + qq, k + p:k + p + qq])[0])
            if right < left - 1e-12 * scale:
                _swap_blocks(r, q, k, p, qq)
                moved = True
                break
            k += p
        if not moved:
            break
    if np.array_equal(r, sf.r):
        return sf
    return _finish(q, r)


def orient_2x2_blocks(sf: SchurForm) -> SchurForm:
    """Flip every 2x2 block ``[a g; b a]`` with ``|b| > |g|`` so its lower entry is the smaller one."""
    r = sf.r.copy()
    q = sf.q.copy()
    flip = np.array([[0.0, 1.0], [1.0, 0.0]])
    for k, size in zip(sf.block_starts(), sf.block_sizes):
        if size != 2:
            continue
        alpha = r[k, k]
        if not alpha > 0.0:
            raise ValueError(f"2x2 block at rows {k}:{k + 2} has non-positive diagonal {alpha:.6g}")
        if abs(r[k + 1, k]) > abs(r[k, k + 1]):
            _rotate_pair(r, q, k, flip)
    return _finish(q, r)


def rsf2csf(sf: SchurForm):
    """Convert a real Schur form to complex Schur form ``(u, t)``.

    Each 2x2 block is triangularized with a complex Givens rotation; the
    eigenvalue with positive imaginary part lands first.
    """
    u = sf.q.astype(complex)
    t = sf.r.astype(complex)
    for k, size in reversed(list(zip(sf.block_starts(), sf.block_sizes))):
        if size != 2:
            continue
        m = k + 1
        lam = _block_eigs(sf.r[k:k + 2, k:k + 2])[0]
        mu = lam - t[m, m]
        rad = math.hypot(abs(mu), abs(t[m, k]))
        c, s = mu / rad, t[m, k].real / rad
        g = np.array([[np.conj(c), s], [-s, c]])
        t[k:k + 2, k:] = g @ t[k:k + 2, k:]
        t[:m + 1, k:k + 2] = t[:m + 1, k:k + 2] @ g.conj().T
        u[:, k:k + 2] = u[:, k:k + 2] @ g.conj().T
        t[m, k] = 0.0
    return u, np.triu(t)


def eig_from_schur(sf: SchurForm) -> EigDecomp:
    """Eigen decomposition ``a = x diag(lam) x^{-1}`` from a Schur form."""
    u, t = rsf2csf(sf)
    n = t.shape[0]
    lam = np.diag(t).copy()
    anorm = max(np.abs(sf.r).max(), np.finfo(float).tiny)
    if n > 1:
        gaps = np.abs(lam[:, None] - lam[None, :])
        np.fill_diagonal(gaps, np.inf)
        if gaps.min() < 1e-10 * anorm:
            raise SingularMatrixError("eigenvalues are (nearly) repeated; matrix may be defective")
    y = np.zeros((n, n), dtype=complex)
    for k in range(n):
        y[k, k] = 1.0
        for i in range(k - 1, -1, -1):
            acc = t[i, i + 1:k + 1] @ y[i + 1:k + 1, k]
            y[i, k] = -acc / (t[i, i] - lam[k])
    x = u @ y
    x /= np.linalg.norm(x, axis=0)
    sig = svd_small(x)
    return EigDecomp(x=x, lam=lam, cond_x=float(sig[0] / sig[-1]))


@njit
def _jacobi_orthogonalize(w, tol, max_sweeps):
    """One-sided Jacobi sweeps on the columns of ``w`` (in place)."""
    n = w.shape[1]
    m = w.shape[0]
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0 * w[0, 0]
                for i in range(m):
                    alpha += (w[i, p] * np.conj(w[i, p])).real
                    beta += (w[i, q] * np.conj(w[i, q])).real
                    gamma += np.conj(w[i, p]) * w[i, q]
                ag = abs(gamma)
                if ag == 0.0 or ag <= tol * math.sqrt(alpha * beta):
                    continue
                rotated = True
                phase = gamma / ag
                zeta = (beta - alpha) / (2.0 * ag)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                for i in range(m):
                    wp = w[i, p]
                    wq = w[i, q] * np.conj(phase)
                    w[i, p] = c * wp - s * wq
                    w[i, q] = s * wp + c * wq
        if not rotated:
            break


def _jacobi_orthogonalize_np(w, tol, max_sweeps):
    """Vectorized twin of ``_jacobi_orthogonalize``."""
    n = w.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                wp, wq = w[:, p].copy(), w[:, q].copy()
                alpha = np.vdot(wp, wp).real
                beta = np.vdot(wq, wq).real
                gamma = np.vdot(wp, wq)
                ag = abs(gamma)
                if ag == 0.0 or ag <= tol * math.sqrt(alpha * beta):
                    continue
                rotated = True
                phase = gamma / ag
                zeta = (beta - alpha) / (2.0 * ag)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                wq = wq * np.conj(phase)
                w[:, p] = c * wp - s * wq
                w[:, q] = s * wp + c * wq
        if not rotated:
            break


jacobi_orthogonalize = _jacobi_orthogonalize if USE_NUMBA else _jacobi_orthogonalize_np


def svd_small(a):
    """Singular values (descending) by one-sided Jacobi."""
    w = np.array(a, dtype=complex if np.iscomplexobj(a) else float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("svd_small expects a square matrix")
    jacobi_orthogonalize(w, EPS, 60)
    sig = np.sqrt(np.sum((w * w.conj()).real, axis=0))
    return np.sort(sig)[::-1]


def cond2(a):
    sig = svd_small(a)
    return float(sig[0] / sig[-1]) if sig[-1] > 0.0 else math.inf


def norm2(a):
    return float(svd_small(a)[0])


def dense_lu_solve(a, b, rel_pivot_tol=1e-14):
    """Solve ``a x = b`` by LU with partial pivoting (real or complex).

    Raises SingularMatrixError when a pivot is smaller than
    ``rel_pivot_tol * max|a|``.
    """
    is_complex = np.iscomplexobj(a) or np.iscomplexobj(b)
    dtype = complex if is_complex else float
    lu = np.array(a, dtype=dtype)
    if lu.ndim != 2 or lu.shape[0] != lu.shape[1]:
        raise ValueError("dense_lu_solve expects a square matrix")
    x = np.array(b, dtype=dtype)
    vec = x.ndim == 1
    if vec:
        x = x[:, None]
    n = lu.shape[0]
    thresh = rel_pivot_tol * max(np.abs(lu).max(), np.finfo(float).tiny)
    for k in range(n):
        piv = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[piv, k]) < thresh:
            raise SingularMatrixError(f"pivot {k} is {abs(lu[piv, k]):.3e}, below {thresh:.3e}")
        if piv != k:
            lu[[k, piv]] = lu[[piv, k]]
            x[[k, piv]] = x[[piv, k]]
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
        x[k + 1:] -= np.outer(lu[k + 1:, k], x[k])
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - lu[k, k + 1:] @ x[k + 1:]) / lu[k, k]
    return x[:, 0] if vec else x


def inv_small(a):
    a = np.asarray(a)
    return dense_lu_solve(a, np.eye(a.shape[0], dtype=a.dtype))
