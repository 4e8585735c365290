import numpy as np
import pytest
import scipy.sparse as sp

from symsplit.bench import phantom_system
from symsplit.core import CentroSymmetricSystem, SymmetryError, split_system
from symsplit.solvers import (
    SolveOptions,
    SolverError,
    SplitSolveError,
    cgls_solve,
    pseudo_solve_dense,
    sart_solve,
    solve_direct,
    solve_split,
)

from conftest import mirror_complete, random_centro

@pytest.fixture(scope="module")
def phantom32():
    return phantom_system(32)


PINV_F = [0.3527, 0.2941, 0.4256, 0.1781, 0.0433, 0.0015]


def pinv_oracle(A, p):
    A = A.toarray() if sp.issparse(A) else np.asarray(A)
    return np.linalg.pinv(A, rcond=max(A.shape) * np.finfo(float).eps) @ p


def relerr(a, b):
    nb = np.linalg.norm(b)
    return np.linalg.norm(a - b) / nb if nb else np.linalg.norm(a)


# --- dense minimum-norm -----------------------------------------------------------

def test_pseudo_solve_quarter_system_example_odd():
    f = pseudo_solve_dense([[0, -6, -2], [-5, 1, -2]], [-2, -2])
    np.testing.assert_allclose(f, [0.3512, 0.2508, 0.2475], atol=1e-4)


def test_pseudo_solve_identity(rng):
    p = rng.standard_normal(7)
    np.testing.assert_allclose(pseudo_solve_dense(np.eye(7), p), p, rtol=0, atol=1e-15)


def test_pseudo_solve_picks_minimum_norm():
    np.testing.assert_allclose(pseudo_solve_dense([[1.0, 1.0]], [2.0]), [1.0, 1.0], atol=1e-14)


def test_pseudo_solve_cap():
    with pytest.raises(SolverError):
        pseudo_solve_dense(np.eye(10), np.ones(10), cap=50)


def test_pseudo_solve_rejects_nonfinite():
    with pytest.raises(ValueError):
        pseudo_solve_dense([[1.0, np.nan]], [1.0])


# --- CGLS -------------------------------------------------------------------------

def test_cgls_identity(rng):
    p = rng.standard_normal(9)
    rep = cgls_solve(np.eye(9), p, SolveOptions(method="cgls"))
    np.testing.assert_allclose(rep.f, p, atol=1e-14)
    assert rep.iterations <= 2


def test_cgls_example_even():
    rep = cgls_solve([[2, 12, 12], [9, 7, 14]], [12, 14], SolveOptions(method="cgls", tol=1e-12))
    np.testing.assert_allclose(rep.f, [0.3542, 0.3373, 0.6036], atol=1e-4)


def test_cgls_matches_dense_on_sparse_full_rank(rng):
    A = sp.random(50, 30, density=0.3, random_state=7, format="csr") + sp.eye(50, 30)
    p = rng.standard_normal(50)
    rep = cgls_solve(A, p, SolveOptions(method="cgls", tol=1e-14, max_iters=500))
    assert relerr(rep.f, pinv_oracle(A, p)) <= 1e-8


def test_cgls_minimum_norm_on_rank_deficient(rng):
    A = rng.standard_normal((20, 4)) @ rng.standard_normal((4, 12))
    p = rng.standard_normal(20)
    rep = cgls_solve(A, p, SolveOptions(method="cgls", tol=1e-13, max_iters=200))
    assert relerr(rep.f, pinv_oracle(A, p)) <= 1e-7


def test_cgls_residual_is_monotone(rng):
    for _ in range(20):
        A = rng.standard_normal((40, 25)) * (rng.random((40, 25)) < 0.3)
        rep = cgls_solve(A, rng.standard_normal(40), SolveOptions(method="cgls", max_iters=25))
        h = np.array(rep.history)
        assert np.all(np.diff(h) <= 1e-12 * h[0])


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_cgls_nan_detection():
    A = np.array([[1e308, 1e308], [1e308, -1e308]])
    with pytest.raises(SolverError):
        cgls_solve(A, [1e308, 1e308], SolveOptions(method="cgls"))


# --- SART -------------------------------------------------------------------------

def test_sart_identity_one_iteration(rng):
    p = rng.random(6)
    rep = sart_solve(np.eye(6), p, SolveOptions(method="sart", relaxation=1.0))
    np.testing.assert_allclose(rep.f, p, atol=1e-15)
    assert rep.iterations == 1


def test_sart_rejects_zero_matrix():
    with pytest.raises(SolverError):
        sart_solve(np.zeros((4, 4)), np.ones(4), SolveOptions(method="sart"))


def test_sart_skips_empty_rows():
    A = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 2.0]])
    rep = sart_solve(A, [1.0, 5.0, 4.0], SolveOptions(method="sart", max_iters=50))
    np.testing.assert_allclose(rep.f, [1.0, 2.0], atol=1e-12)


def test_sart_is_deterministic(rng):
    A = np.abs(random_centro(rng, 10, 6))
    p = A @ rng.random(6)
    a = sart_solve(A, p, SolveOptions(method="sart", max_iters=30))
    b = sart_solve(A, p, SolveOptions(method="sart", max_iters=30))
    assert a.f.tobytes() == b.f.tobytes()


@pytest.mark.parametrize("relaxation", [1.0, 0.5, 0.1])
def test_sart_residual_decreases_on_phantom_system(phantom32, relaxation):
    sys32, _ = phantom32
    opts = SolveOptions(method="sart", max_iters=50, tol=1e-15, relaxation=relaxation)
    h = np.array(sart_solve(sys32.A, sys32.p, opts).history)
    assert len(h) == 51 and np.all(np.diff(h) < 0)


def test_split_sart_limit_matches_full_sart(rng):
    # nonnegative, full column rank, so both iterations share the unique solution
    A = mirror_complete(rng.random((6, 6)) + 0.1)
    f_true = rng.random(6)
    S = CentroSymmetricSystem(A, A @ f_true, 0.0)
    opts = SolveOptions(method="sart", max_iters=20000, tol=1e-14)
    full = solve_direct(S, opts)
    split = solve_split(S, opts, workers=1)
    assert relerr(split.f, full.f) <= 1e-6
    assert relerr(full.f, f_true) <= 1e-6


# --- drivers ------------------------------------------------------------------------

def test_direct_example(example):
    rep = solve_direct(CentroSymmetricSystem(*example, 0.0))
    np.testing.assert_allclose(rep.f, PINV_F, atol=5e-5, rtol=0)
    assert rep.solution_norm == pytest.approx(0.6523, abs=1e-4)
    assert rep.mode == "direct"


def test_split_example_matches_oracle(example):
    A, p = example
    rep = solve_split(CentroSymmetricSystem(A, p, 0.0))
    assert relerr(rep.f, pinv_oracle(A, p)) <= 1e-9
    assert rep.mode == "split" and set(rep.branches) == {"odd", "even"}


def test_identity_system(rng):
    p = rng.standard_normal(8)
    S = CentroSymmetricSystem(np.eye(8), p)
    for solve in (solve_direct, solve_split):
        np.testing.assert_allclose(solve(S).f, p, atol=1e-14)


def test_mirror_symmetric_rhs_gives_symmetric_solution(rng):
    A = random_centro(rng, 10, 8)
    p = rng.standard_normal(10)
    p = p + p[::-1]
    S = CentroSymmetricSystem(A, p, 0.0)
    rep = solve_split(S)
    assert np.all(split_system(S).p1 == 0)
    assert np.all(rep.branches["odd"].f == 0)
    np.testing.assert_array_equal(rep.f, rep.f[::-1])


@pytest.mark.parametrize("rank", [None, 1, 2, 3])
def test_split_matches_dense_oracle_sweep(rng, rank):
    for _ in range(50):
        M, N = 2 * rng.integers(1, 11), 2 * rng.integers(1, 11)
        A = random_centro(rng, M, N, rank=rank)
        p = rng.standard_normal(M)
        rep = solve_split(CentroSymmetricSystem(A, p, 1e-12), workers=1)
        assert relerr(rep.f, pinv_oracle(A, p)) <= 1e-9


@pytest.mark.parametrize("method", ["dense_minnorm", "cgls"])
def test_residual_consistency(rng, method):
    opts = SolveOptions(method=method, tol=1e-10, max_iters=500)
    for _ in range(20):
        A = random_centro(rng, 16, 10)
        p = rng.standard_normal(16)
        S = CentroSymmetricSystem(A, p, 0.0)
        d, s = solve_direct(S, opts), solve_split(S, opts)
        assert s.residual_norm <= d.residual_norm + 10 * opts.tol * np.linalg.norm(p)


def test_consistent_system_cgls_residual(rng):
    A = random_centro(rng, 30, 20)
    p = A @ rng.standard_normal(20)
    rep = solve_split(CentroSymmetricSystem(A, p, 0.0), SolveOptions(method="cgls", tol=1e-12, max_iters=500))
    assert rep.residual_norm / np.linalg.norm(p) <= 1e-8


@pytest.mark.parametrize("method", ["dense_minnorm", "cgls", "sart"])
def test_split_is_independent_of_workers(rng, method):
    A = np.abs(random_centro(rng, 20, 12))
    S = CentroSymmetricSystem(A, A @ rng.random(12), 0.0)
    opts = SolveOptions(method=method, max_iters=50)
    a = solve_split(S, opts, workers=1)
    b = solve_split(S, opts, workers=8)
    assert a.f.tobytes() == b.f.tobytes()


def test_split_refuses_asymmetric(rng):
    S = CentroSymmetricSystem(rng.standard_normal((4, 4)), np.ones(4))
    with pytest.raises(SymmetryError):
        solve_split(S)


def test_split_reports_both_branch_failures():
    S = CentroSymmetricSystem(np.eye(4), np.ones(4))
    with pytest.raises(SplitSolveError) as exc:
        solve_split(S, SolveOptions(dense_cap=1), workers=2)
    assert set(exc.value.errors) == {"odd", "even"}


def test_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(method="lsqr")
    with pytest.raises(ValueError):
        SolveOptions(tol=0)
    with pytest.raises(ValueError):
        SolveOptions(max_iters=0)
    with pytest.raises(ValueError):
        SolveOptions(relaxation=2.5)
