import json

import numpy as np
import pytest
import scipy.sparse as sps

from firkprec.discretize import Grid3D, PdeCoeffs, assemble_fdm
from firkprec.exceptions import FactorizationError
from firkprec.sparse import (CsrMatrix, StageOperator, assemble_block, block_2x2, block_solve,
                             combine, equilibrate, factorize, ilu0, load_mk_pair, rcm_ordering,
                             read_matrix_market, sparse_lu, spmv, stage_apply,
                             write_matrix_market)
from firkprec.sparse import _kernels as kern
from firkprec.tableau import gauss_legendre


def random_sparse(rng, n, density=0.2, diag_shift=4.0, cplx=False):
    a = sps.random(n, n, density=density, random_state=np.random.RandomState(rng.integers(1 << 30)))
    a = a + diag_shift * sps.eye(n)
    if cplx:
        a = a + 1j * sps.random(n, n, density=density, random_state=np.random.RandomState(1))
    return a.tocsr()


def test_roundtrip_scipy(rng):
    sp = random_sparse(rng, 30)
    a = CsrMatrix.from_scipy(sp)
    a.validate()
    assert np.allclose(a.toarray(), sp.toarray())
    assert (a.to_scipy() != sp).nnz == 0


def test_from_coo_sums_duplicates():
    a = CsrMatrix.from_coo([0, 0, 1], [1, 1, 0], [1.0, 2.0, 5.0], (2, 2))
    assert a.toarray().tolist() == [[0.0, 3.0], [5.0, 0.0]]


def test_arrays_frozen_and_copied():
    ptr = np.array([0, 1, 2])
    a = CsrMatrix.from_arrays(2, 2, ptr, [0, 1], [1.0, 2.0])
    ptr[1] = 0  # caller array still writable, matrix unaffected
    assert a.indptr[1] == 1
    with pytest.raises(ValueError):
        a.data[0] = 3.0


@pytest.mark.parametrize("cplx_x", [False, True])
def test_spmv(rng, cplx_x):
    sp = random_sparse(rng, 40)
    a = CsrMatrix.from_scipy(sp)
    x = rng.standard_normal(40) + (1j * rng.standard_normal(40) if cplx_x else 0)
    assert np.allclose(spmv(a, x), sp @ x, atol=1e-13)
    assert np.allclose(a @ x, sp @ x, atol=1e-13)


def test_spmv_empty_rows():
    a = CsrMatrix.from_coo([2], [0], [3.0], (4, 4))
    assert spmv(a, np.ones(4)).tolist() == [0.0, 0.0, 3.0, 0.0]


def test_combine_and_scale(rng):
    a, b = random_sparse(rng, 25), random_sparse(rng, 25, density=0.1)
    ca, cb = CsrMatrix.from_scipy(a), CsrMatrix.from_scipy(b)
    out = combine(2.0, ca, -0.5 + 1j, cb)
    assert np.allclose(out.toarray(), (2.0 * a + (-0.5 + 1j) * b).toarray())
    assert np.allclose(ca.scale(3.0).toarray(), 3.0 * a.toarray())


def test_block_2x2(rng):
    blocks = [random_sparse(rng, 6) for _ in range(4)]
    out = block_2x2(*[CsrMatrix.from_scipy(b) for b in blocks])
    assert np.allclose(out.toarray(), sps.bmat([[blocks[0], blocks[1]], [blocks[2], blocks[3]]]).toarray())


def test_permute_transpose(rng):
    sp = random_sparse(rng, 12)
    a = CsrMatrix.from_scipy(sp)
    p = rng.permutation(12)
    assert np.allclose(a.permute(p, p).toarray(), sp.toarray()[np.ix_(p, p)])
    assert np.allclose(a.transpose().toarray(), sp.toarray().T)


def test_matrix_market_roundtrip(tmp_path, rng):
    sp = random_sparse(rng, 20)
    path = tmp_path / "k.mtx"
    write_matrix_market(path, CsrMatrix.from_scipy(sp))
    back = read_matrix_market(path)
    assert np.allclose(back.toarray(), sp.toarray())


def test_load_mk_pair(tmp_path, rng):
    sp = random_sparse(rng, 10)
    write_matrix_market(tmp_path / "m.mtx", CsrMatrix.eye(10))
    write_matrix_market(tmp_path / "k.mtx", CsrMatrix.from_scipy(sp))
    (tmp_path / "k.mtx.json").write_text(json.dumps({"dof": 10, "source": "unit test"}))
    m, k, meta = load_mk_pair(tmp_path / "m.mtx", tmp_path / "k.mtx")
    assert m.identity and meta["source"] == "unit test"
    (tmp_path / "k.mtx.json").write_text(json.dumps({"dof": 11}))
    with pytest.raises(ValueError, match="dof"):
        load_mk_pair(tmp_path / "m.mtx", tmp_path / "k.mtx")


def test_equilibrate(rng):
    sp = sps.diags(10.0 ** rng.uniform(-4, 4, 30)) @ random_sparse(rng, 30)
    a = CsrMatrix.from_scipy(sp.tocsr())
    dr, dc = equilibrate(a)
    scaled = np.abs(a.scale_rows_cols(dr, dc).toarray())
    # row scales spanned 8 decades; five sweeps bring every max into [0.5, 1]
    for ax in (0, 1):
        mx = scaled.max(axis=ax)
        assert mx.min() >= 0.5 and mx.max() <= 1.0 + 1e-12


def test_rcm_reduces_bandwidth():
    k = assemble_fdm(Grid3D(5), PdeCoeffs(), p=2)
    rng = np.random.default_rng(3)
    p = rng.permutation(k.nrows)
    shuffled = k.permute(p, p)
    perm = rcm_ordering(shuffled)
    assert shuffled.permute(perm, perm).bandwidth() < shuffled.bandwidth()


def test_ilu0_equals_lu_on_tridiagonal(rng):
    n = 50
    main = 4.0 + rng.random(n)
    sp = sps.diags([rng.standard_normal(n - 1), main, rng.standard_normal(n - 1)], [-1, 0, 1]).tocsr()
    a = CsrMatrix.from_scipy(sp)
    b = rng.standard_normal(n)
    f_ilu = ilu0(a, preprocess=False)
    f_lu = sparse_lu(a, preprocess=False)
    assert np.abs(f_ilu.lower.toarray() - f_lu.lower.toarray()).max() <= 1e-12
    assert np.abs(f_ilu.upper.toarray() - f_lu.upper.toarray()).max() <= 1e-12
    x = np.linalg.solve(sp.toarray(), b)
    assert np.abs(block_solve(f_ilu, b) - x).max() <= 1e-12


@pytest.mark.parametrize("cplx", [False, True])
@pytest.mark.parametrize("preprocess", [False, True])
def test_sparse_lu_exact(rng, cplx, preprocess):
    sp = random_sparse(rng, 60, density=0.08, cplx=cplx)
    a = CsrMatrix.from_scipy(sp)
    f = sparse_lu(a, preprocess=preprocess)
    b = rng.standard_normal(60) + 1j * rng.standard_normal(60)
    x = block_solve(f, b)
    assert np.abs(sp @ x - b).max() <= 1e-10


def test_sparse_lu_fdm():
    k = assemble_fdm(Grid3D(6), PdeCoeffs(), p=4)
    a = combine(1.0, CsrMatrix.eye(k.nrows), 0.1, k)
    f = factorize(a, "SparseLU")
    b = np.arange(a.nrows, dtype=float)
    x = block_solve(f, b)
    assert np.linalg.norm(a @ x - b) <= 1e-11 * np.linalg.norm(b)


def test_real_factor_complex_rhs(rng):
    sp = random_sparse(rng, 30)
    f = sparse_lu(CsrMatrix.from_scipy(sp))
    b = rng.standard_normal(30) + 1j * rng.standard_normal(30)
    assert np.allclose(sp @ block_solve(f, b), b, atol=1e-11)


def test_zero_pivot_reports_row():
    a = CsrMatrix.from_dense(np.array([[0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(FactorizationError) as err:
        ilu0(a, preprocess=False)
    assert err.value.row == 0
    with pytest.raises(FactorizationError):
        sparse_lu(a, preprocess=False)


def test_factorize_unknown_backend():
    with pytest.raises(ValueError):
        factorize(CsrMatrix.eye(3), "HILUCSI")


def test_block_solve_shape_check():
    f = factorize(CsrMatrix.eye(3, flag=False), "ILU0")
    with pytest.raises(ValueError):
        block_solve(f, np.ones(4))


# ---------------------------------------------------------- kernel parity

def _fdm_system():
    k = assemble_fdm(Grid3D(5), PdeCoeffs(), p=2)
    return combine(1.0, CsrMatrix.eye(k.nrows), 0.2, k)


def test_kernel_sets_agree():
    a = _fdm_system()
    rng = np.random.default_rng(7)
    x = rng.standard_normal(a.nrows)
    ys = []
    for ks in (kern.NUMBA_KERNELS, kern.NUMPY_KERNELS):
        y = np.full(a.nrows, np.nan)
        ks["spmv"](a.indptr, a.indices, a.data, x, y)
        ys.append(y)
    assert np.allclose(ys[0], ys[1], atol=1e-14)

    outs = []
    for ks in (kern.NUMBA_KERNELS, kern.NUMPY_KERNELS):
        vals = a.data.copy()
        diag = np.zeros(a.nrows, dtype=np.int64)
        assert ks["ilu0"](a.indptr, a.indices, vals, diag, 1e-14) == kern.OK
        outs.append(vals)
    assert np.allclose(outs[0], outs[1], atol=1e-14)

    lus = [ks["lu"](a.indptr, a.indices, a.data, 1e-14) for ks in (kern.NUMBA_KERNELS, kern.NUMPY_KERNELS)]
    for p, q in zip(lus[0][1:], lus[1][1:]):
        assert np.allclose(p, q, atol=1e-13)

    cmb = [ks["combine"](a.indptr, a.indices, a.data, 1.0, a.indptr, a.indices, a.data, 2.0, np.float64)
           for ks in (kern.NUMBA_KERNELS, kern.NUMPY_KERNELS)]
    for p, q in zip(cmb[0], cmb[1]):
        assert np.allclose(p, q)


def test_spmv_kernel_ignores_output_garbage():
    a = _fdm_system()
    x = np.ones(a.nrows)
    y = np.full(a.nrows, np.inf)
    kern.KERNELS["spmv"](a.indptr, a.indices, a.data, x, y)
    assert np.all(np.isfinite(y))


# ---------------------------------------------------------- stage operator

def test_stage_apply_matches_kronecker(small_mk, rng):
    m, k = small_mk
    for s in (1, 2, 3, 4):
        op = StageOperator(m, k, gauss_legendre(s).a, 0.1)
        u = rng.standard_normal(op.size)
        ref = op.toarray() @ u
        assert np.abs(stage_apply(op, u) - ref).max() <= 1e-13 * max(1.0, np.abs(ref).max())


def test_stage_apply_general_mass(rng):
    grid = Grid3D(4)
    k = assemble_fdm(grid, PdeCoeffs(), p=2)
    m = CsrMatrix.from_scipy(sps.diags(1.0 + rng.random(k.nrows)).tocsr())
    op = StageOperator(m, k, gauss_legendre(3).a, 0.25)
    u = rng.standard_normal(op.size)
    assert np.abs(op(u) - op.toarray() @ u).max() <= 1e-12


def test_assemble_block(small_mk):
    m, k = small_mk
    r = np.array([[0.2, -0.4], [0.1, 0.2]])
    blk = assemble_block(m, k, r, 0.5)
    ref = np.kron(np.eye(2), m.toarray()) + 0.5 * np.kron(r, k.toarray())
    assert np.abs(blk.toarray() - ref).max() <= 1e-14
    with pytest.raises(ValueError):
        assemble_block(m, k, np.eye(3), 0.5)


def test_stage_operator_validates(small_mk):
    m, k = small_mk
    with pytest.raises(ValueError):
        StageOperator(m, k, np.eye(2), -1.0)


def test_equilibrate_diagonal_closed_form():
    a = CsrMatrix.from_dense(np.diag([1e6, 1.0]))
    dr, dc = equilibrate(a)
    scaled = a.scale_rows_cols(dr, dc).toarray()
    assert np.allclose(np.diag(scaled), 1.0, atol=1e-12)
    assert dr[0] * dc[0] == pytest.approx(1e-6, rel=1e-12)


def test_equilibrate_random_maxima(rng):
    a = CsrMatrix.from_scipy(random_sparse(rng, 40, density=0.15))
    dr, dc = equilibrate(a)
    scaled = np.abs(a.scale_rows_cols(dr, dc).toarray())
    for ax in (0, 1):
        mx = scaled.max(axis=ax)
        assert mx.min() >= 0.1 and mx.max() <= 1.0 + 1e-12
