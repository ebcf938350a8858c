"""Gauss-Legendre Butcher tableaux and order-condition checks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError

MAX_STAGES = 12


@dataclass(frozen=True)
class ButcherTableau:
    """Coefficients ``(a, b, c)`` of an s-stage Runge-Kutta method."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    name: str = ""

    @property
    def s(self) -> int:
        return self.b.shape[0]

    def validate(self, tol=1e-12):
        s = self.s
        if self.a.shape != (s, s) or self.c.shape != (s,):
            raise ValueError("inconsistent tableau shapes")
        if np.abs(self.a.sum(axis=1) - self.c).max() > tol:
            raise ValueError("row sums of a differ from c")
        if abs(self.b.sum() - 1.0) > tol:
            raise ValueError("weights do not sum to one")
        if s > 1 and np.any(np.diff(self.c) <= 0.0):
            raise ValueError("abscissae are not strictly increasing")
        d = np.diag(self.a)
        if np.abs(d - d[::-1]).max() > tol:
            raise ValueError("diagonal of a is not symmetric about its centre")
        return self


def _legendre(n, x):
    """P_n(x) and P_n'(x) by the three-term recurrence."""
    p0, p1 = np.ones_like(x), x.copy()
    if n == 0:
        return p0, np.zeros_like(x)
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


def gauss_nodes(n, tol=1e-15, max_iter=100):
    """Gauss-Legendre nodes and weights on [-1, 1], ascending."""
    if n < 1:
        raise ValueError("need at least one node")
    k = np.arange(1, n + 1)
    x = -np.cos(math.pi * (k - 0.25) / (n + 0.5))
    for _ in range(max_iter):
        p, dp = _legendre(n, x)
        dx = p / dp
        x = x - dx
        if np.abs(dx).max() <= tol:
            break
    else:
        raise ConvergenceError(f"Legendre root iteration did not converge for n={n}")
    _, dp = _legendre(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    return x, w


def gauss_legendre(s: int) -> ButcherTableau:
    """The s-stage Gauss-Legendre collocation method (order 2s)."""
    if not 1 <= s <= MAX_STAGES:
        raise ValueError(f"stage count must be in 1..{MAX_STAGES}, got {s}")
    xg, wg = gauss_nodes(s)
    c = 0.5 * (xg + 1.0)
    b = 0.5 * wg
    # a_ij = int_0^{c_i} l_j(t) dt, integrand of degree s-1 so s points are exact
    a = np.empty((s, s))
    for i in range(s):
        t = 0.5 * c[i] * (xg + 1.0)
        wt = 0.5 * c[i] * wg
        for j in range(s):
            others = np.delete(c, j)
            lj = np.prod((t[:, None] - others) / (c[j] - others), axis=1)
            a[i, j] = wt @ lj
    return ButcherTableau(a=a, b=b, c=c, name=f"GL{s}").validate(tol=1e-12)


@dataclass(frozen=True)
class OrderReport:
    """Max violations of B(k) (quadrature) and C(k) (stage order) conditions."""

    b_violations: tuple
    c_violations: tuple
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.b_violations + self.c_violations, default=0.0) <= self.tol

    def rows(self):
        for k, v in enumerate(self.b_violations, start=1):
            yield f"B({k})", v, v <= self.tol
        for k, v in enumerate(self.c_violations, start=1):
            yield f"C({k})", v, v <= self.tol


def verify_order_conditions(tab: ButcherTableau, tol=1e-11) -> OrderReport:
    """Check ``b.c^(k-1) = 1/k`` for k <= 2s and ``A c^(k-1) = c^k / k`` for k <= s."""
    s = tab.s
    bv = tuple(abs(tab.b @ tab.c ** (k - 1) - 1.0 / k) for k in range(1, 2 * s + 1))
    cv = tuple(float(np.abs(tab.a @ tab.c ** (k - 1) - tab.c ** k / k).max())
               for k in range(1, s + 1))
    return OrderReport(b_violations=bv, c_violations=cv, tol=tol)
