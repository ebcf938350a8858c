"""Restarted GMRES with right preconditioning."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class GmresConfig:
    restart: int = 30
    max_iters: int = 500
    rtol: float = 1e-8
    reorth_tol: float = 1e-8

    def __post_init__(self):
        if self.restart < 1:
            raise ValueError("restart must be >= 1")
        if self.max_iters < self.restart:
            raise ValueError("max_iters must be >= restart")
        if not self.rtol > 0:
            raise ValueError("rtol must be positive")


@dataclass
class SolveStats:
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    converged: bool = False
    breakdown: Optional[str] = None
    true_residual: float = math.nan
    cycles: int = 0
    orthogonality: float = 0.0


def _identity(v):
    return v


def _givens(a, b):
    if b == 0.0:
        return 1.0, 0.0
    r = math.hypot(a, b)
    return a / r, b / r


def gmres_right(apply_a: Callable, apply_minv: Optional[Callable], b, x0=None,
                cfg: GmresConfig = GmresConfig()):
    """Solve ``A x = b`` with GMRES on ``A M^{-1} y = b``, ``x = M^{-1} y``.

    Convergence means ``|b - A x| <= rtol |b|`` for the true residual: the
    Arnoldi estimate triggers a check against the explicitly computed
    residual, and the iteration continues if the two disagree.

    Returns ``(x, SolveStats)``.  ``residual_history`` holds relative
    residuals, the first entry for the initial guess.
    """
    minv = apply_minv or _identity
    b = np.asarray(b, dtype=float)
    n = b.size
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    stats = SolveStats()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        stats.converged = True
        stats.true_residual = 0.0
        stats.residual_history.append(0.0)
        return np.zeros(n), stats
    target = cfg.rtol * bnorm
    r = b - apply_a(x)
    beta = np.linalg.norm(r)
    stats.residual_history.append(beta / bnorm)
    stats.true_residual = beta / bnorm
    if beta <= target:
        stats.converged = True
        return x, stats

    m = cfg.restart
    while stats.iterations < cfg.max_iters:
        stats.cycles += 1
        v = np.zeros((m + 1, n))
        h = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        v[0] = r / beta
        j_done = 0
        happy = False
        for j in range(m):
            if stats.iterations >= cfg.max_iters:
                break
            w = apply_a(minv(v[j]))
            wnorm0 = np.linalg.norm(w)
            for i in range(j + 1):
                h[i, j] = v[i] @ w
                w -= h[i, j] * v[i]
            # one more pass if w kept a component along the basis
            c = v[:j + 1] @ w
            if np.abs(c).max() > cfg.reorth_tol * np.linalg.norm(w):
                h[:j + 1, j] += c
                w -= c @ v[:j + 1]
            h[j + 1, j] = np.linalg.norm(w)
            stats.iterations += 1
            j_done = j + 1
            if h[j + 1, j] > 1e-14 * max(wnorm0, 1e-300):
                v[j + 1] = w / h[j + 1, j]
            else:
                happy = True
            for i in range(j):
                t = cs[i] * h[i, j] + sn[i] * h[i + 1, j]
                h[i + 1, j] = -sn[i] * h[i, j] + cs[i] * h[i + 1, j]
                h[i, j] = t
            cs[j], sn[j] = _givens(h[j, j], h[j + 1, j])
            h[j, j] = cs[j] * h[j, j] + sn[j] * h[j + 1, j]
            h[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            stats.residual_history.append(abs(g[j + 1]) / bnorm)
            if abs(g[j + 1]) <= target or happy:
                break
        if j_done:
            basis = v[:j_done + 1] if not happy else v[:j_done]
            stats.orthogonality = max(stats.orthogonality,
                                      float(np.abs(basis @ basis.T - np.eye(basis.shape[0])).max()))
            yk = np.zeros(j_done)
            for i in range(j_done - 1, -1, -1):
                yk[i] = (g[i] - h[i, i + 1:j_done] @ yk[i + 1:]) / h[i, i]
            x = x + minv(v[:j_done].T @ yk)
        r = b - apply_a(x)
        beta = np.linalg.norm(r)
        stats.true_residual = beta / bnorm
        if beta <= target:
            stats.converged = True
            return x, stats
    if not stats.converged and stats.breakdown is None:
        stats.breakdown = "max_iters"
    return x, stats
