"""Finite-difference advection-diffusion operators on the unit cube.

Unknowns are interior nodes only (homogeneous Dirichlet data eliminated),
numbered lexicographically with x fastest:
``idx = i + n*j + n*n*k`` for node ``(x_i, y_j, z_k) = ((i+1)h, (j+1)h, (k+1)h)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

from .sparse import CsrMatrix

ORDERS = (2, 4, 6)


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``n`` interior nodes per axis, ``h = 1/(n+1)``."""

    n: int
    dim: int = 3

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"need at least 3 interior nodes per axis, got {self.n}")
        if self.dim not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3")

    @classmethod
    def from_h(cls, h, dim=3):
        n = round(1.0 / h) - 1
        if abs((n + 1) * h - 1.0) > 1e-12:
            raise ValueError(f"1/h must be an integer, got h={h}")
        return cls(n, dim)

    @property
    def h(self):
        return 1.0 / (self.n + 1)

    @property
    def size(self):
        return self.n ** self.dim

    def coords(self):
        """Interior node coordinates, one array per axis, in unknown order."""
        x = self.h * np.arange(1, self.n + 1)
        mesh = np.meshgrid(*([x] * self.dim), indexing="ij")
        # x fastest: reverse the axis order before flattening
        return tuple(m.transpose(tuple(range(self.dim))[::-1]).reshape(-1) for m in mesh)


def Grid3D(n):
    return Grid(n, 3)


@dataclass(frozen=True)
class PdeCoeffs:
    mu: float = 1.0
    v: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"diffusion coefficient must be positive, got {self.mu}")


def fd_weights(deriv, offsets):
    """Finite-difference weights (Fornberg's recurrence) at 0 for nodes ``offsets``.

    ``sum_j w_j f(o_j) ~ f^{(deriv)}(0)`` for unit spacing.
    """
    z = np.asarray(offsets, dtype=float)
    npts = z.size
    if npts <= deriv:
        raise ValueError("need more nodes than the derivative order")
    if np.unique(z).size != npts:
        raise ValueError("offsets must be distinct")
    c = np.zeros((npts, deriv + 1))
    c1, c4 = 1.0, z[0]
    c[0, 0] = 1.0
    for i in range(1, npts):
        mn = min(i, deriv)
        c2, c5, c4 = 1.0, c4, z[i]
        for j in range(i):
            c3 = z[i] - z[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, deriv]


def stencil_nodes(i, n, deriv, p):
    """Grid nodes (0..n+1, boundary included) used for derivative ``deriv`` at node ``i``.

    Centered with ``p+1`` points where it fits; otherwise shifted against the
    boundary, with one extra point for the second derivative so the order
    stays ``p``.
    """
    half = p // 2
    if i - half >= 0 and i + half <= n + 1:
        return np.arange(i - half, i + half + 1)
    width = p + 1 if deriv == 1 else p + 2
    if i - half < 0:
        return np.arange(0, width)
    return np.arange(n + 2 - width, n + 2)


def operator_1d(n, p, mu, v):
    """Dense ``-mu d2/dx2 + v d/dx`` on interior nodes (boundary columns dropped)."""
    if p not in ORDERS:
        raise ValueError(f"accuracy order must be one of {ORDERS}, got {p}")
    if n + 2 < p + 2:
        raise ValueError(f"n={n} is too small for a {p}th-order stencil")
    h = 1.0 / (n + 1)
    out = np.zeros((n, n))
    for row, i in enumerate(range(1, n + 1)):
        for deriv, coef, scale in ((2, -mu, h * h), (1, v, h)):
            if coef == 0.0:
                continue
            nodes = stencil_nodes(i, n, deriv, p)
            w = fd_weights(deriv, nodes - i) * (coef / scale)
            inside = (nodes >= 1) & (nodes <= n)
            out[row, nodes[inside] - 1] += w[inside]
    return out


def assemble_fdm(grid: Grid, coeffs: PdeCoeffs, p: int = 2) -> CsrMatrix:
    """Stiffness ``K = -mu Laplace + v . grad`` of order ``p``; the mass matrix is the identity."""
    n, dim = grid.n, grid.dim
    v = tuple(coeffs.v) + (0.0,) * (3 - len(coeffs.v))
    eye = sps.identity(n, format="csr")
    k = None
    for axis in range(dim):
        d1 = sps.csr_matrix(operator_1d(n, p, coeffs.mu, v[axis]))
        # axis 0 (x) varies fastest, i.e. is the last Kronecker factor
        factors = [eye] * dim
        factors[dim - 1 - axis] = d1
        term = factors[0]
        for f in factors[1:]:
            term = sps.kron(term, f, format="csr")
        k = term if k is None else k + term
    return CsrMatrix.from_scipy(k.tocsr())


def mass_fdm(grid: Grid) -> CsrMatrix:
    return CsrMatrix.eye(grid.size)


def manufactured_solution(x, y, z, t):
    """``sin(1.5 pi t) sin(pi x) sin(pi y) sin(pi z)``."""
    return np.sin(1.5 * math.pi * t) * np.sin(math.pi * x) * np.sin(math.pi * y) * np.sin(math.pi * z)


def manufactured_source(x, y, z, t, coeffs: PdeCoeffs):
    """``u_t - mu Laplace u + v . grad u`` for the manufactured solution."""
    pi = math.pi
    sx, sy, sz = np.sin(pi * x), np.sin(pi * y), np.sin(pi * z)
    cx, cy, cz = np.cos(pi * x), np.cos(pi * y), np.cos(pi * z)
    s3 = sx * sy * sz
    st = np.sin(1.5 * pi * t)
    v1, v2, v3 = tuple(coeffs.v) + (0.0,) * (3 - len(coeffs.v))
    return (1.5 * pi * np.cos(1.5 * pi * t) * s3
            + 3.0 * pi * pi * coeffs.mu * st * s3
            + st * pi * (v1 * cx * sy * sz + v2 * sx * cy * sz + v3 * sx * sy * cz))


def compute_peclet(h, coeffs: PdeCoeffs):
    """Cell Peclet number ``2 h |v| / mu``."""
    return 2.0 * h * float(np.linalg.norm(coeffs.v)) / coeffs.mu
