"""Time stepping, experiment runners and CSV output."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from . import discretize as dz
from ._jit import backend_name
from .factory import build_plan, parse_name
from .krylov import GmresConfig, gmres_right
from .precondops import BlockPreconditioner, assemble
from .sparse import CsrMatrix, StageOperator, load_mk_pair, spmv
from .tableau import ButcherTableau, gauss_legendre

log = logging.getLogger(__name__)

WARM_STARTS = ("stage", "nodal", "zero")


@dataclass(frozen=True)
class ExperimentConfig:
    """One time-stepping run.

    Either ``n`` (interior nodes per axis of the unit cube) or the pair
    ``m_path`` / ``k_path`` (Matrix Market files) defines the spatial
    operator.  ``warm_start`` selects the initial GMRES guess: the previous
    step's stage vector (``stage``), the previous solution copied into every
    stage (``nodal``), or zero.
    """

    n: Optional[int] = 15
    order: int = 2
    m_path: Optional[str] = None
    k_path: Optional[str] = None
    mu: float = 1.0
    v: tuple = (1.0, 1.0, 1.0)
    stages: int = 2
    dt: float = 1.0 / 16
    steps: int = 10
    t0: float = 0.0
    precond: str = "BRSD"
    backend: str = "ILU0"
    restart: int = 30
    max_iters: int = 500
    rtol: float = 1e-8
    warm_start: str = "stage"
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.warm_start not in WARM_STARTS:
            raise ValueError(f"warm_start must be one of {WARM_STARTS}")
        if (self.m_path is None) != (self.k_path is None):
            raise ValueError("m_path and k_path must be given together")
        if self.m_path is None and self.n is None:
            raise ValueError("give either a grid size n or matrix files")
        parse_name(self.precond)

    @property
    def h(self):
        return None if self.n is None else 1.0 / (self.n + 1)

    @property
    def gmres(self):
        return GmresConfig(restart=self.restart, max_iters=self.max_iters, rtol=self.rtol)

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["v"] = list(self.v)
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "v" in d:
            d["v"] = tuple(float(x) for x in d["v"])
        return cls(**d)


@dataclass
class Problem:
    m: CsrMatrix
    k: CsrMatrix
    coords: Optional[tuple]
    coeffs: dz.PdeCoeffs
    meta: dict = field(default_factory=dict)

    @property
    def manufactured(self):
        return self.coords is not None

    def source(self, t):
        if self.coords is None:
            return np.zeros(self.m.nrows)
        x, y, z = self.coords
        return dz.manufactured_source(x, y, z, t, self.coeffs)

    def exact(self, t):
        x, y, z = self.coords
        return dz.manufactured_solution(x, y, z, t)


@lru_cache(maxsize=16)
def _fdm_matrices(n, order, mu, v):
    grid = dz.Grid3D(n)
    return dz.assemble_fdm(grid, dz.PdeCoeffs(mu, v), order), grid.coords()


def build_problem(cfg: ExperimentConfig) -> Problem:
    coeffs = dz.PdeCoeffs(cfg.mu, tuple(cfg.v))
    if cfg.m_path is not None:
        m, k, meta = load_mk_pair(cfg.m_path, cfg.k_path)
        return Problem(m, k, None, coeffs, meta)
    k, coords = _fdm_matrices(cfg.n, cfg.order, cfg.mu, tuple(cfg.v))
    meta = {"grid": cfg.n, "h": cfg.h, "order": cfg.order, "peclet": dz.compute_peclet(cfg.h, coeffs),
            "boundary_stencil": "shifted-centered"}
    return Problem(CsrMatrix.eye(k.nrows), k, coords, coeffs, meta)


@lru_cache(maxsize=64)
def cached_plan(name, stages):
    return build_plan(name, gauss_legendre(stages))


def stage_rhs(u_n, t_n, tab: ButcherTableau, dt, k: CsrMatrix, f):
    """Right-hand side of ``M k_i + dt sum_j a_ij K k_j = f(t_n + c_i dt) - K u_n``."""
    ku = spmv(k, u_n)
    return np.concatenate([f(t_n + ci * dt) - ku for ci in tab.c])


@dataclass(frozen=True)
class StepRecord:
    step: int
    iterations: int
    residual: float
    converged: bool
    error: float
    seconds: float


@dataclass
class RunState:
    u: np.ndarray
    t: float
    step: int = 0
    stages: Optional[np.ndarray] = None


@dataclass
class Stepper:
    """Everything fixed across the steps of one run."""

    tab: ButcherTableau
    op: StageOperator
    problem: Problem
    precond: BlockPreconditioner
    gmres: GmresConfig
    warm_start: str = "stage"


def advance_step(state: RunState, stepper: Stepper):
    """Solve one stage system and apply the ``b``-weighted update."""
    t0 = time.perf_counter()
    tab, op = stepper.tab, stepper.op
    rhs = stage_rhs(state.u, state.t, tab, op.dt, op.k, stepper.problem.source)
    if stepper.warm_start == "stage" and state.stages is not None:
        x0 = state.stages
    elif stepper.warm_start == "nodal":
        x0 = np.tile(state.u, tab.s)
    else:
        x0 = None
    kvec, stats = gmres_right(op, stepper.precond, rhs, x0=x0, cfg=stepper.gmres)
    slopes = kvec.reshape(tab.s, -1)
    u_new = state.u + op.dt * (tab.b @ slopes)
    t_new = state.t + op.dt
    err = math.nan
    if stepper.problem.manufactured:
        exact = stepper.problem.exact(t_new)
        err = float(np.linalg.norm(u_new - exact) / np.linalg.norm(exact))
    rec = StepRecord(step=state.step + 1, iterations=stats.iterations, residual=stats.true_residual,
                     converged=stats.converged, error=err, seconds=time.perf_counter() - t0)
    if not stats.converged:
        log.warning("step %d: GMRES did not converge (%s, residual %.3e)",
                    rec.step, stats.breakdown, stats.true_residual)
    return RunState(u=u_new, t=t_new, step=state.step + 1, stages=kvec), rec


@dataclass
class RunResult:
    config: ExperimentConfig
    records: list
    u: np.ndarray
    factorizations: dict
    factor_time: float

    @property
    def avg_iterations(self):
        """Mean GMRES iterations from the second step on (all steps if only one)."""
        recs = self.records[1:] if len(self.records) > 1 else self.records
        return float(np.mean([r.iterations for r in recs]))

    @property
    def avg_solve_time(self):
        recs = self.records[1:] if len(self.records) > 1 else self.records
        return float(np.mean([r.seconds for r in recs]))

    @property
    def all_converged(self):
        return all(r.converged for r in self.records)

    @property
    def final_error(self):
        return self.records[-1].error


def make_stepper(cfg: ExperimentConfig, problem: Optional[Problem] = None,
                 precond: Optional[BlockPreconditioner] = None) -> Stepper:
    problem = problem or build_problem(cfg)
    tab = gauss_legendre(cfg.stages)
    op = StageOperator(problem.m, problem.k, tab.a, cfg.dt)
    if precond is None:
        precond = assemble(cached_plan(cfg.precond, cfg.stages), problem.m, problem.k, cfg.dt, cfg.backend)
    return Stepper(tab, op, problem, precond, cfg.gmres, cfg.warm_start)


def initial_state(cfg: ExperimentConfig, prob: Problem):
    """Manufactured solution at ``t0``; for matrix-file problems (no source)
    a standard normal vector drawn with ``cfg.seed``."""
    if prob.manufactured:
        return prob.exact(cfg.t0)
    return np.random.default_rng(cfg.seed).standard_normal(prob.m.nrows)


def run(cfg: ExperimentConfig, problem: Optional[Problem] = None,
        precond: Optional[BlockPreconditioner] = None, u0=None) -> RunResult:
    """March ``cfg.steps`` steps from ``u0`` (default: ``initial_state``)."""
    stepper = make_stepper(cfg, problem, precond)
    prob = stepper.problem
    u0 = initial_state(cfg, prob) if u0 is None else np.asarray(u0, dtype=float)
    state = RunState(u=u0, t=cfg.t0)
    records = []
    for _ in range(cfg.steps):
        state, rec = advance_step(state, stepper)
        records.append(rec)
    pc = stepper.precond
    return RunResult(cfg, records, state.u, pc.factor_counts(), pc.factor_time)


# ----------------------------------------------------------------- studies

SWEEP_FIELDS = ("precond", "stages", "n", "h", "order", "dt", "backend", "steps",
                "avg_iterations", "max_iterations", "all_converged",
                "factorizations", "factor_real", "factor_complex", "factor_real2x2", "final_error")
TIMING_FIELDS = ("precond", "stages", "n", "dt", "factor_time", "avg_solve_time")


def _fmt(x):
    if isinstance(x, float):
        return repr(float(x)) if math.isfinite(x) else str(x)
    return str(x)


def sweep_row(res: RunResult):
    c = res.config
    f = res.factorizations
    return {
        "precond": c.precond, "stages": c.stages, "n": c.n, "h": c.h, "order": c.order,
        "dt": c.dt, "backend": c.backend, "steps": c.steps,
        "avg_iterations": res.avg_iterations,
        "max_iterations": max(r.iterations for r in res.records),
        "all_converged": res.all_converged,
        "factorizations": sum(f.values()), "factor_real": f["real"], "factor_complex": f["complex"],
        "factor_real2x2": f["real2x2"], "final_error": res.final_error,
    }


def _sweep_cell(cfg: ExperimentConfig):
    res = run(cfg)
    timing = {"precond": cfg.precond, "stages": cfg.stages, "n": cfg.n, "dt": cfg.dt,
              "factor_time": res.factor_time, "avg_solve_time": res.avg_solve_time}
    log.info("%s s=%d n=%d dt=%g: %.2f its", cfg.precond, cfg.stages, cfg.n, cfg.dt, res.avg_iterations)
    return sweep_row(res), timing


def run_iteration_sweep(base: ExperimentConfig, preconds, dts, ns, workers=1):
    """Run every (preconditioner, dt, n) cell.  Returns ``(rows, timing_rows)``.

    Cells are independent; ``workers > 1`` runs them in a process pool.
    Row order does not depend on ``workers``.
    """
    cells = [base.replace(precond=name, dt=float(dt), n=int(n))
             for n in ns for dt in dts for name in preconds]
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_sweep_cell, cells))
    else:
        out = [_sweep_cell(c) for c in cells]
    return [o[0] for o in out], [o[1] for o in out]


CONVERGENCE_FIELDS = ("n", "h", "dt", "steps", "final_time", "error", "order", "avg_iterations")


def run_convergence_study(base: ExperimentConfig, ladder, final_time):
    """Errors at ``final_time`` along a ladder of ``(n, dt)`` pairs.

    ``order`` is ``log2(e_i / e_{i+1})`` relative to the previous row
    (blank for the first).
    """
    rows = []
    for n, dt in ladder:
        steps = round(final_time / dt)
        if abs(steps * dt - final_time) > 1e-12:
            raise ValueError(f"final time {final_time} is not a multiple of dt={dt}")
        res = run(base.replace(n=int(n), dt=float(dt), steps=steps))
        rows.append({"n": n, "h": 1.0 / (n + 1), "dt": dt, "steps": steps, "final_time": final_time,
                     "error": res.final_error, "order": math.nan, "avg_iterations": res.avg_iterations})
    for prev, row in zip(rows, rows[1:]):
        row["order"] = math.log2(prev["error"] / row["error"])
    return rows


def rows_to_csv(rows, fields):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r[k]) for k in fields})
    return buf.getvalue()


def write_csv(path, rows, fields):
    text = rows_to_csv(rows, fields)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return text


def write_manifest(path, config: dict, outputs: dict):
    """JSON manifest: config echo, library versions, kernel backend and
    sha256 of each output's content."""
    import numba
    import scipy

    from . import __version__
    manifest = {
        "config": config,
        "versions": {"firkprec": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "numba": numba.__version__},
        "backend": backend_name(),
        "outputs": {name: {"path": p, "sha256": hashlib.sha256(text.encode()).hexdigest()}
                    for name, (p, text) in outputs.items()},
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest
