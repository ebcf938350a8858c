"""Assembled block preconditioners acting on stage vectors."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import smalldense as sd
from .factory import PrecondPlan
from .sparse import (BACKENDS, CsrMatrix, StageOperator, assemble_block,
                     block_solve, combine, factorize, spmv)
from .exceptions import FactorizationError

# relative tolerance for recognising equal / conjugate / real block coefficients
SHARE_TOL = 1e-13


@dataclass(frozen=True)
class DiagBlock:
    """One diagonal block of the core: rows ``start:start+size``.

    ``tag`` is ``real``, ``complex``, ``real2x2``; ``factor`` indexes
    ``BlockPreconditioner.factors`` and ``conj`` says the block is the
    complex conjugate of that factor's matrix.
    """

    start: int
    size: int
    tag: str
    factor: int
    conj: bool = False


@dataclass(eq=False)
class BlockPreconditioner:
    plan: PrecondPlan
    dt: float
    m: CsrMatrix
    k: CsrMatrix
    backend: str
    factors: list = field(default_factory=list)
    blocks: list = field(default_factory=list)
    factor_kinds: list = field(default_factory=list)
    factor_time: float = 0.0

    @property
    def s(self):
        return self.plan.s

    @property
    def n(self):
        return self.m.nrows

    @property
    def n_factorizations(self):
        return len(self.factors)

    def factor_counts(self):
        """Number of factorizations by kind (``real``, ``complex``, ``real2x2``)."""
        out = {"real": 0, "complex": 0, "real2x2": 0}
        for kind in self.factor_kinds:
            out[kind] += 1
        return out

    def __call__(self, v):
        return apply(self, v)


def _coef_scale(core):
    return max(float(np.abs(core).max()), np.finfo(float).tiny)


def _factor(p: BlockPreconditioner, mat: CsrMatrix, kind: str, label: str):
    t0 = time.perf_counter()
    try:
        f = factorize(mat, p.backend)
    except FactorizationError as exc:
        raise FactorizationError(f"{p.plan.name} block {label}: {exc}", row=exc.row, block=label) from exc
    p.factor_time += time.perf_counter() - t0
    p.factors.append(f)
    p.factor_kinds.append(kind)
    return len(p.factors) - 1


def assemble(plan: PrecondPlan, m: CsrMatrix, k: CsrMatrix, dt: float, backend="SparseLU") -> BlockPreconditioner:
    """Factorize the diagonal blocks a plan needs.

    Equal 1x1 coefficients share one factorization and a coefficient equal
    to the conjugate of an earlier one reuses it by conjugation; a complex
    coefficient whose imaginary part vanishes is factorized in real
    arithmetic.
    """
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    if m.shape != k.shape:
        raise ValueError("M and K must have the same shape")
    if not dt > 0:
        raise ValueError("time step must be positive")
    p = BlockPreconditioner(plan=plan, dt=float(dt), m=m, k=k, backend=backend)

    if plan.structure == "kron":
        mat = combine(plan.kron_mass, m, plan.kron_stiff * dt, k)
        idx = _factor(p, mat, "real", "kron")
        p.blocks.append(DiagBlock(0, plan.s, "real", idx))
        return p

    core = plan.core
    tol = SHARE_TOL * _coef_scale(core)
    seen = []  # (coefficient, factor index)
    start = 0
    for size in plan.block_sizes:
        if size == 2:
            r = np.real(core[start:start + 2, start:start + 2])
            idx = _factor(p, assemble_block(m, k, r, dt), "real2x2", f"{start}:{start + 2}")
            p.blocks.append(DiagBlock(start, 2, "real2x2", idx))
        else:
            c = core[start, start]
            if abs(np.imag(c)) <= tol:
                c = float(np.real(c))
            match = None
            for val, idx in seen:
                if abs(val - c) <= tol:
                    match = (idx, False)
                    break
                if isinstance(c, complex) and abs(np.conj(val) - c) <= tol:
                    match = (idx, True)
                    break
            tag = "complex" if isinstance(c, complex) or np.iscomplexobj(c) else "real"
            if match is None:
                idx = _factor(p, assemble_block(m, k, c, dt), tag, str(start))
                seen.append((c, idx))
                p.blocks.append(DiagBlock(start, 1, tag, idx))
            else:
                p.blocks.append(DiagBlock(start, 1, tag, match[0], conj=match[1]))
        start += size
    return p


def _solve_block(p: BlockPreconditioner, blk: DiagBlock, rhs):
    f = p.factors[blk.factor]
    if blk.conj:
        return np.conj(block_solve(f, np.conj(rhs)))
    return block_solve(f, rhs)


def _core_solve(p: BlockPreconditioner, w):
    """Solve ``(I kron M + dt G kron K) y = w`` by block substitution."""
    plan = p.plan
    core = plan.core
    s, n = w.shape
    dtype = np.result_type(w.dtype, core.dtype)
    y = np.zeros((s, n), dtype=dtype)
    ky = [None] * s
    if plan.structure == "diagonal":
        order = p.blocks
    elif plan.structure == "upper":
        order = reversed(p.blocks)
    else:
        order = p.blocks
    for blk in order:
        rows = range(blk.start, blk.start + blk.size)
        if plan.structure == "upper":
            done = range(blk.start + blk.size, s)
        elif plan.structure == "lower":
            done = range(0, blk.start)
        else:
            done = ()
        rhs = []
        for r in rows:
            acc = w[r].astype(dtype, copy=True)
            for j in done:
                g = core[r, j]
                if g != 0:
                    acc -= (p.dt * g) * ky[j]
            rhs.append(acc)
        if blk.size == 1:
            sol = [_solve_block(p, blk, rhs[0])]
        else:
            stacked = _solve_block(p, blk, np.concatenate(rhs))
            sol = [stacked[:n], stacked[n:]]
        for r, x in zip(rows, sol):
            y[r] = x
            if plan.structure != "diagonal":
                ky[r] = spmv(p.k, x)
    return y


def apply(p: BlockPreconditioner, v):
    """``M^{-1} v`` for a stage vector ``v`` (length ``s * n``)."""
    v = np.asarray(v)
    s, n = p.s, p.n
    if v.shape != (s * n,):
        raise ValueError(f"stage vector has shape {v.shape}, expected ({s * n},)")
    vb = v.reshape(s, n)
    plan = p.plan
    if plan.structure == "kron":
        # (scale S kron B)^{-1} = (1/scale) S^{-1} kron B^{-1}
        w = sd.dense_lu_solve(plan.core, vb)
        f = p.factors[0]
        y = np.stack([block_solve(f, w[i]) for i in range(s)]) / plan.kron_scale
        return y.reshape(-1)
    w = vb if plan.transform_inv is None else plan.transform_inv @ vb
    y = _core_solve(p, w)
    out = y if plan.transform is None else plan.transform @ y
    if not np.iscomplexobj(v) and np.iscomplexobj(out):
        out = out.real
    return np.ascontiguousarray(out).reshape(-1)


def dense_inverse(p: BlockPreconditioner):
    """Materialize ``M^{-1}`` column by column (small problems only)."""
    size = p.s * p.n
    eye = np.eye(size)
    return np.column_stack([apply(p, eye[:, j]) for j in range(size)])


def accuracy_diagnostic(p: BlockPreconditioner, op: StageOperator, max_dim=2000):
    """``|| (X^{-1} kron I) A M^{-1} (X kron I) - I ||_2`` computed densely.

    ``X`` is the plan's transform (identity for plans without one).
    """
    size = op.size
    if size > max_dim:
        raise ValueError(f"dense diagnostic limited to {max_dim} unknowns, problem has {size}")
    prod = op.toarray() @ dense_inverse(p)
    plan = p.plan
    if plan.transform is not None and plan.structure != "kron":
        eye_n = np.eye(op.n)
        prod = np.kron(plan.transform_inv, eye_n) @ prod @ np.kron(plan.transform, eye_n)
    return float(np.linalg.norm(prod - np.eye(size), 2))
