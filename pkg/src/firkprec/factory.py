"""Small-matrix recipes (plans) for the block preconditioners.

Every plan except KPS and PNKP describes a preconditioner of the form

    (T kron I) (I kron M + dt G kron K) (T^{-1} kron I)

with an s x s transform ``T`` and a core ``G`` that is upper (quasi-)
triangular, lower triangular or diagonal.  KPS and PNKP are single
Kronecker products ``scale * S kron (cm M + ck dt K)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from . import smalldense as sd
from ._jit import USE_NUMBA, njit
from .exceptions import ConvergenceError
from .tableau import ButcherTableau, gauss_legendre

VARIANTS = ("BCSD", "BRSD", "BJF", "SABRSD", "TBRSD", "SOBT", "BGS", "BD", "KPS", "PNKP", "BC")
# variants with a reversed-ordering counterpart
REVERSIBLE = ("BCSD", "SABRSD")


@dataclass(frozen=True)
class PrecondPlan:
    """s x s level description of one preconditioner.

    Attributes
    ----------
    variant : str
        Name from ``VARIANTS``; ``reverse`` marks the -R ordering.
    structure : str
        ``"upper"``, ``"lower"``, ``"diagonal"`` or ``"kron"``.
    transform, transform_inv : ndarray or None
        ``T`` and ``T^{-1}``; None means identity.
    core : ndarray
        ``G`` for the non-Kronecker structures, ``S`` for ``"kron"``.
    block_sizes : tuple
        Diagonal block sizes of ``core`` (1 or 2).
    """

    variant: str
    s: int
    structure: str
    core: np.ndarray
    block_sizes: tuple
    transform: Optional[np.ndarray] = None
    transform_inv: Optional[np.ndarray] = None
    reverse: bool = False
    kron_scale: float = 1.0
    kron_mass: float = 0.0
    kron_stiff: float = 1.0
    details: dict = field(default_factory=dict)

    @property
    def name(self):
        return self.variant + ("-R" if self.reverse else "")

    @property
    def is_complex(self):
        return np.iscomplexobj(self.core) or np.iscomplexobj(self.transform)

    def matrix(self):
        """Dense ``T G T^{-1}`` (the s x s matrix this plan approximates A by)."""
        if self.structure == "kron":
            raise ValueError("Kronecker-splitting plans have no single s x s core")
        if self.transform is None:
            return self.core.copy()
        return self.transform @ self.core @ self.transform_inv


def _blocks_of(core, sizes=None):
    return tuple(sizes) if sizes is not None else (1,) * core.shape[0]


def _upper_inv_unit(x_strict, s, iu):
    """Inverse of the unit upper triangular matrix with strict part ``x_strict``."""
    u = np.eye(s)
    u[iu] = x_strict
    inv = np.eye(s)
    for j in range(s):
        for i in range(j - 1, -1, -1):
            inv[i, j] = -u[i, i + 1:j + 1] @ inv[i + 1:j + 1, j]
    return u, inv


@njit
def _sdut_step1(x, r, rinv, tie_weight):
    """kappa_2(r u^{-1}) (+ tie term) for unit upper triangular u with strict part x."""
    s = r.shape[0]
    u = np.eye(s)
    k = 0
    for i in range(s):
        for j in range(i + 1, s):
            u[i, j] = x[k]
            k += 1
    uinv = np.eye(s)
    for j in range(s):
        for i in range(j - 1, -1, -1):
            acc = 0.0
            for m in range(i + 1, j + 1):
                acc += u[i, m] * uinv[m, j]
            uinv[i, j] = -acc
    g = r @ uinv
    if not np.all(np.isfinite(g)):
        return np.inf
    w = g.copy()
    sd._jacobi_orthogonalize(w, sd.EPS, 60)
    smax = 0.0
    smin = np.inf
    for j in range(s):
        nrm = math.sqrt(np.sum(w[:, j] * w[:, j]))
        smax = max(smax, nrm)
        smin = min(smin, nrm)
    if smin <= 0.0:
        return np.inf
    val = smax / smin
    if tie_weight != 0.0:
        val += tie_weight * math.sqrt(np.sum(g * g)) * math.sqrt(np.sum((u @ rinv) ** 2))
    return val


def _sdut_step1_np(x, r, rinv, tie_weight):
    """Vectorized twin of ``_sdut_step1``."""
    s = r.shape[0]
    iu = np.triu_indices(s, 1)
    u, uinv = _upper_inv_unit(x, s, iu)
    g = r @ uinv
    if not np.all(np.isfinite(g)):
        return np.inf
    w = g.copy()
    sd.jacobi_orthogonalize(w, sd.EPS, 60)
    nrm = np.sqrt(np.sum(w * w, axis=0))
    if nrm.min() <= 0.0:
        return np.inf
    val = nrm.max() / nrm.min()
    if tie_weight != 0.0:
        val += tie_weight * np.linalg.norm(g) * np.linalg.norm(u @ rinv)
    return float(val)


sdut_step1 = _sdut_step1 if USE_NUMBA else _sdut_step1_np


def _golden(f, lo, hi, tol=1e-12, max_iter=500):
    """Golden-section minimization of a unimodal ``f`` on ``[lo, hi]``."""
    g = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1, x2 = b - g * (b - a), a + g * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - g * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + g * (b - a)
            f2 = f(x2)
    x = 0.5 * (a + b)
    return x, f(x)


@dataclass(frozen=True)
class SdutResult:
    r_hat: np.ndarray
    alpha: float
    kappa: float
    err_norm: float
    starts: int


def sdut_objectives(r, r_hat):
    """``(kappa_2(r r_hat^{-1}), ||I - r r_hat^{-1}||_2)``."""
    g = r @ sd.inv_small(r_hat)
    return sd.cond2(g), sd.norm2(np.eye(r.shape[0]) - g)


def optimize_sdut(r, n_starts=8, perturb=0.2, seed=0, tie_weight=1e-6, rtol=1e-12):
    """Singly-diagonal upper triangular approximation of ``r``.

    Step 1 minimizes ``kappa_2(r u^{-1})`` over unit upper triangular ``u``
    with Nelder-Mead, started from the strict upper part of ``r`` divided by
    its mean diagonal and from ``n_starts`` random relative perturbations of
    that point.  A ``tie_weight`` multiple of the Frobenius condition number
    is added so that flat optima resolve to a reproducible point.  Step 2
    picks ``alpha`` in (0, 1] minimizing ``||I - r u^{-1} / alpha||_2`` by
    golden section.  Returns ``alpha * u``.
    """
    r = np.asarray(r, dtype=float)
    s = r.shape[0]
    iu = np.triu_indices(s, 1)
    nvar = len(iu[0])
    eye = np.eye(s)
    rinv = sd.inv_small(r)

    def step1(x):
        return sdut_step1(np.asarray(x, dtype=float), r, rinv, tie_weight)

    if nvar == 0:
        u = eye.copy()
        n_used = 0
    else:
        x0 = (np.triu(r, 1) / np.mean(np.diag(r)))[iu]
        rng = np.random.default_rng(seed)
        starts = [x0] + [x0 * (1.0 + perturb * rng.standard_normal(nvar)) for _ in range(n_starts)]
        opts = dict(xatol=rtol, fatol=rtol, maxiter=400 * nvar * nvar + 4000,
                    maxfev=400 * nvar * nvar + 4000, adaptive=True)
        best = None
        for xs in starts:
            res = minimize(step1, xs, method="Nelder-Mead", options=opts)
            # a restart from the converged point shakes off simplex collapse
            res = minimize(step1, res.x, method="Nelder-Mead", options=opts)
            if best is None or res.fun < best.fun:
                best = res
        if not np.isfinite(best.fun):
            raise ConvergenceError("SDUT optimization found no finite objective", best=best.x)
        if not best.success:
            raise ConvergenceError(f"SDUT step 1 did not converge: {best.message}", best=best.x)
        u, _ = _upper_inv_unit(best.x, s, iu)
        n_used = len(starts)

    g = r @ sd.inv_small(u)

    def step2(alpha):
        return sd.norm2(eye - g / alpha)

    alpha, _ = _golden(step2, 1e-8, 1.0, tol=rtol)
    r_hat = alpha * u
    kappa, err = sdut_objectives(r, r_hat)
    return SdutResult(r_hat=r_hat, alpha=float(alpha), kappa=kappa, err_norm=err, starts=n_used)


def _tab(tab_or_s):
    if isinstance(tab_or_s, ButcherTableau):
        return tab_or_s
    return gauss_legendre(int(tab_or_s))


def _schur_sorted(a, key):
    return sd.reorder_schur(sd.real_schur(a), key)


def build_bcsd(tab, reverse=False) -> PrecondPlan:
    """Complex Schur plan, eigenvalue moduli ascending (descending if ``reverse``)."""
    tab = _tab(tab)
    sf = _schur_sorted(tab.a, "desc-modulus" if reverse else "asc-modulus")
    u, t = sd.rsf2csf(sf)
    return PrecondPlan(variant="BCSD", s=tab.s, structure="upper", core=t,
                       block_sizes=_blocks_of(t), transform=u, transform_inv=u.conj().T,
                       reverse=reverse)


def build_brsd(tab) -> PrecondPlan:
    """Real Schur plan with diagonal-block real parts descending."""
    tab = _tab(tab)
    sf = _schur_sorted(tab.a, "desc-real")
    return PrecondPlan(variant="BRSD", s=tab.s, structure="upper", core=sf.r,
                       block_sizes=sf.block_sizes, transform=sf.q, transform_inv=sf.q.T,
                       details={"schur": sf})


def build_bjf(tab) -> PrecondPlan:
    """Eigendecomposition plan ``A = X diag(lam) X^{-1}``."""
    tab = _tab(tab)
    ed = sd.eig_from_schur(_schur_sorted(tab.a, "asc-modulus"))
    xinv = sd.inv_small(ed.x)
    return PrecondPlan(variant="BJF", s=tab.s, structure="diagonal", core=np.diag(ed.lam),
                       block_sizes=_blocks_of(ed.x), transform=ed.x, transform_inv=xinv,
                       details={"cond_x": ed.cond_x})


def _oriented_schur(a, reverse):
    return sd.orient_2x2_blocks(_schur_sorted(a, "desc-real" if reverse else "asc-real"))


def build_sabrsd(tab, reverse=False, **opt_kwargs) -> PrecondPlan:
    """Sorted, oriented real Schur form with R replaced by its SDUT optimum."""
    tab = _tab(tab)
    sf = _oriented_schur(tab.a, reverse)
    res = optimize_sdut(sf.r, **opt_kwargs)
    return PrecondPlan(variant="SABRSD", s=tab.s, structure="upper", core=res.r_hat,
                       block_sizes=_blocks_of(res.r_hat), transform=sf.q, transform_inv=sf.q.T,
                       reverse=reverse,
                       details={"r": sf.r, "alpha": res.alpha, "kappa": res.kappa,
                                "err_norm": res.err_norm})


def build_tbrsd(tab) -> PrecondPlan:
    """Upper triangular part of the sorted, oriented real Schur factor."""
    tab = _tab(tab)
    sf = _oriented_schur(tab.a, False)
    r_hat = np.triu(sf.r)
    return PrecondPlan(variant="TBRSD", s=tab.s, structure="upper", core=r_hat,
                       block_sizes=_blocks_of(r_hat), transform=sf.q, transform_inv=sf.q.T,
                       details={"r": sf.r})


def build_sobt(tab, **opt_kwargs) -> PrecondPlan:
    """Singly-diagonal lower triangular ``L = P opt(P A P) P`` with P the flip."""
    tab = _tab(tab)
    flip = np.eye(tab.s)[::-1]
    res = optimize_sdut(flip @ tab.a @ flip, **opt_kwargs)
    l_hat = flip @ res.r_hat @ flip
    return PrecondPlan(variant="SOBT", s=tab.s, structure="lower", core=l_hat,
                       block_sizes=_blocks_of(l_hat),
                       details={"alpha": res.alpha, "kappa": res.kappa, "err_norm": res.err_norm})


def build_bgs(tab) -> PrecondPlan:
    tab = _tab(tab)
    lo = np.tril(tab.a)
    return PrecondPlan(variant="BGS", s=tab.s, structure="lower", core=lo, block_sizes=_blocks_of(lo))


def build_bd(tab) -> PrecondPlan:
    tab = _tab(tab)
    d = np.diag(np.diag(tab.a))
    return PrecondPlan(variant="BD", s=tab.s, structure="diagonal", core=d, block_sizes=_blocks_of(d))


def build_pnkp(tab) -> PrecondPlan:
    """``dt A kron K``."""
    tab = _tab(tab)
    return PrecondPlan(variant="PNKP", s=tab.s, structure="kron", core=tab.a.copy(),
                       block_sizes=(1,), kron_scale=1.0, kron_mass=0.0, kron_stiff=1.0)


def kps_objective(alpha, mu):
    return float(np.max(np.abs((mu - alpha) / (mu + alpha))))


def kps_alpha(a, grid=64, tol=1e-12):
    """Minimize ``max |(mu - alpha) / (mu + alpha)|`` over the spectrum of ``a^{-1}``."""
    mu = 1.0 / np.linalg.eigvals(a)
    lo, hi = np.abs(mu).min(), np.abs(mu).max()
    if hi - lo <= tol * hi:
        return float(np.sqrt(lo * hi))
    f = lambda la: kps_objective(math.exp(la), mu)
    pts = np.linspace(math.log(lo), math.log(hi), grid)
    vals = [f(p) for p in pts]
    k = int(np.argmin(vals))
    left, right = pts[max(k - 1, 0)], pts[min(k + 1, grid - 1)]
    la, _ = _golden(f, left, right, tol=tol)
    return float(math.exp(la))


def build_kps(tab) -> PrecondPlan:
    """``1/(2 alpha) (I + alpha A) kron (dt K + alpha M)``."""
    tab = _tab(tab)
    alpha = kps_alpha(tab.a)
    s_mat = np.eye(tab.s) + alpha * tab.a
    return PrecondPlan(variant="KPS", s=tab.s, structure="kron", core=s_mat, block_sizes=(1,),
                       kron_scale=1.0 / (2.0 * alpha), kron_mass=alpha, kron_stiff=1.0,
                       details={"alpha": alpha, "objective": kps_objective(alpha, 1.0 / np.linalg.eigvals(tab.a))})


def optimal_circulant(a):
    """First column of the Frobenius-nearest circulant to ``a``."""
    s = a.shape[0]
    j = np.arange(s)
    return np.array([a[(j + k) % s, j].mean() for k in range(s)])


def circulant(col):
    s = len(col)
    i, j = np.indices((s, s))
    return np.asarray(col)[(i - j) % s]


def fourier_matrix(s):
    j, k = np.indices((s, s))
    return np.exp(2j * math.pi * j * k / s) / math.sqrt(s)


def build_bc(tab) -> PrecondPlan:
    """Block circulant plan ``C = F diag(fft(c)) F^H``."""
    tab = _tab(tab)
    col = optimal_circulant(tab.a)
    lam = np.fft.fft(col)
    # eigenvalues at k = 0 and k = s/2 are real; drop the rounding residue
    for k in {0, tab.s // 2} if tab.s % 2 == 0 else {0}:
        lam[k] = lam[k].real
    f = fourier_matrix(tab.s)
    return PrecondPlan(variant="BC", s=tab.s, structure="diagonal", core=np.diag(lam),
                       block_sizes=_blocks_of(f), transform=f, transform_inv=f.conj().T,
                       details={"c": col})


_BUILDERS = {
    "BCSD": build_bcsd, "BRSD": build_brsd, "BJF": build_bjf, "SABRSD": build_sabrsd,
    "TBRSD": build_tbrsd, "SOBT": build_sobt, "BGS": build_bgs, "BD": build_bd,
    "KPS": build_kps, "PNKP": build_pnkp, "BC": build_bc,
}


def parse_name(name):
    """``"SABRSD-R"`` -> ``("SABRSD", True)``."""
    key = name.strip().upper()
    reverse = key.endswith("-R")
    if reverse:
        key = key[:-2]
    if key not in _BUILDERS:
        raise ValueError(f"unknown preconditioner {name!r}; choose from {VARIANTS} (+ -R for {REVERSIBLE})")
    if reverse and key not in REVERSIBLE:
        raise ValueError(f"{key} has no reversed-ordering variant")
    return key, reverse


def build_plan(name, tab) -> PrecondPlan:
    key, reverse = parse_name(name)
    if reverse:
        return _BUILDERS[key](tab, reverse=True)
    return _BUILDERS[key](tab)
