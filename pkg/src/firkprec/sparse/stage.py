"""The stage operator ``I_s kron M + dt A kron K`` and its diagonal blocks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .csr import CsrMatrix, block_2x2, combine, spmv


@dataclass(frozen=True, eq=False)
class StageOperator:
    """Matrix-free stage system.  Stage vectors are stored stage-major:
    entries ``[i*n:(i+1)*n]`` belong to stage ``i``."""

    m: CsrMatrix
    k: CsrMatrix
    a: np.ndarray
    dt: float

    def __post_init__(self):
        if self.m.shape != self.k.shape or self.m.nrows != self.m.ncols:
            raise ValueError(f"M {self.m.shape} and K {self.k.shape} must be square and conforming")
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        a = np.asarray(self.a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("Butcher matrix must be square")

    @property
    def s(self):
        return self.a.shape[0]

    @property
    def n(self):
        return self.m.nrows

    @property
    def size(self):
        return self.s * self.n

    def __call__(self, u):
        return stage_apply(self, u)

    def toarray(self):
        """Dense ``I kron M + dt A kron K`` (small problems only)."""
        return np.kron(np.eye(self.s), self.m.toarray()) + self.dt * np.kron(self.a, self.k.toarray())


def stage_apply(op: StageOperator, u):
    """``(I kron M + dt A kron K) u`` with one product by K (and M) per stage."""
    u = np.asarray(u)
    if u.shape != (op.size,):
        raise ValueError(f"stage vector has shape {u.shape}, expected ({op.size},)")
    blocks = u.reshape(op.s, op.n)
    ku = np.stack([spmv(op.k, blocks[j]) for j in range(op.s)])
    if op.m.identity:
        mu = blocks
    else:
        mu = np.stack([spmv(op.m, blocks[j]) for j in range(op.s)])
    return (mu + op.dt * (op.a @ ku)).reshape(-1)


def assemble_block(m: CsrMatrix, k: CsrMatrix, r, dt) -> CsrMatrix:
    """Diagonal block for a 1x1 (real or complex) or 2x2 real coefficient.

    1x1: ``M + dt r K``.  2x2: ``[[M + dt r11 K, dt r12 K], [dt r21 K, M + dt r22 K]]``.
    """
    r = np.atleast_2d(np.asarray(r))
    if r.shape == (1, 1):
        return combine(1.0, m, dt * r[0, 0], k)
    if r.shape != (2, 2):
        raise ValueError(f"diagonal block must be 1x1 or 2x2, got {r.shape}")
    d1 = combine(1.0, m, dt * r[0, 0], k)
    d2 = combine(1.0, m, dt * r[1, 1], k)
    return block_2x2(d1, k.scale(dt * r[0, 1]), k.scale(dt * r[1, 0]), d2)
