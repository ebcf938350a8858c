import numpy as np
import pytest

from firkprec.krylov import GmresConfig, gmres_right


def well_conditioned(rng, n):
    return np.eye(n) * 3.0 + rng.standard_normal((n, n)) / np.sqrt(n)


@pytest.mark.parametrize("seed", range(5))
def test_matches_dense_solve(seed):
    rng = np.random.default_rng(seed)
    a = well_conditioned(rng, 100)
    b = rng.standard_normal(100)
    x, st = gmres_right(lambda v: a @ v, None, b, cfg=GmresConfig(rtol=1e-12))
    ref = np.linalg.solve(a, b)
    assert st.converged
    assert np.abs(x - ref).max() <= 1e-8 * np.abs(ref).max()


def test_exact_preconditioner_one_iteration(rng):
    a = well_conditioned(rng, 60)
    ainv = np.linalg.inv(a)
    b = rng.standard_normal(60)
    x, st = gmres_right(lambda v: a @ v, lambda v: ainv @ v, b, cfg=GmresConfig(rtol=1e-10))
    assert st.converged and st.iterations == 1
    assert np.linalg.norm(a @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_restart_and_history(rng):
    n = 80
    a = np.diag(np.linspace(1, 100, n)) + 0.1 * rng.standard_normal((n, n))
    b = rng.standard_normal(n)
    x, st = gmres_right(lambda v: a @ v, None, b, cfg=GmresConfig(restart=10, max_iters=400, rtol=1e-9))
    assert st.converged and st.cycles > 1
    assert len(st.residual_history) == st.iterations + 1
    assert st.true_residual <= 1e-9
    hist = np.array(st.residual_history)
    # within a cycle the Arnoldi estimate never increases
    for c in range(st.cycles):
        seg = hist[c * 10 + 1:(c + 1) * 10 + 1]
        assert np.all(np.diff(seg) <= 1e-12)
    assert st.orthogonality <= 1e-10


def test_max_iters_flag(rng):
    n = 50
    a = np.diag(np.logspace(0, 8, n))
    b = np.ones(n)
    x, st = gmres_right(lambda v: a @ v, None, b, cfg=GmresConfig(restart=5, max_iters=10, rtol=1e-14))
    assert not st.converged
    assert st.breakdown == "max_iters"
    assert st.iterations == 10


def test_zero_rhs():
    x, st = gmres_right(lambda v: v, None, np.zeros(5))
    assert st.converged and st.iterations == 0 and not x.any()


def test_initial_guess_already_solution(rng):
    a = well_conditioned(rng, 20)
    x0 = rng.standard_normal(20)
    b = a @ x0
    x, st = gmres_right(lambda v: a @ v, None, b, x0=x0)
    assert st.converged and st.iterations == 0


def test_happy_breakdown():
    # A has 3 distinct eigenvalues: Krylov space is exhausted after 3 steps
    a = np.diag([1.0, 2.0, 3.0] * 10)
    x, st = gmres_right(lambda v: a @ v, None, np.ones(30), cfg=GmresConfig(rtol=1e-14))
    assert st.converged and st.iterations == 3


@pytest.mark.parametrize("kw", [dict(restart=0), dict(restart=30, max_iters=10), dict(rtol=0.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        GmresConfig(**kw)


def test_arnoldi_estimate_matches_true_residual(rng):
    n = 120
    a = np.diag(np.linspace(1, 50, n)) + 0.2 * rng.standard_normal((n, n))
    minv = np.diag(1.0 / np.diag(a))
    b = rng.standard_normal(n)
    x, st = gmres_right(lambda v: a @ v, lambda v: minv @ v, b,
                        cfg=GmresConfig(restart=8, max_iters=400, rtol=1e-10))
    assert st.converged and st.cycles > 1
    true = np.linalg.norm(b - a @ x) / np.linalg.norm(b)
    assert abs(st.residual_history[-1] - true) <= 1e-8 * max(true, 1e-10) + 1e-14
    assert st.true_residual == pytest.approx(true, rel=1e-8)
