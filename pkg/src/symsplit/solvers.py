"""Least-squares solvers and the direct/split solve drivers."""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, List, Optional

import numpy as np
import scipy.linalg as sla

from .core import (
    CentroSymmetricSystem,
    Matrix,
    SolutionPair,
    as_matrix,
    is_sparse,
    recombine_solution,
    split_system,
)

METHODS = ("dense_minnorm", "cgls", "sart")
DENSE_CAP = 50_000_000


class SolverError(RuntimeError):
    pass


class SplitSolveError(SolverError):
    """One or both branches of a split solve failed."""

    def __init__(self, errors: dict):
        self.errors = errors
        parts = ", ".join(f"{k}: {v}" for k, v in errors.items())
        super().__init__(f"split solve failed ({parts})")


@dataclass(frozen=True)
class SolveOptions:
    method: str = "dense_minnorm"
    max_iters: int = 200
    tol: float = 1e-10
    relaxation: float = 1.0
    dense_cap: int = DENSE_CAP

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.relaxation <= 2:
            raise ValueError("relaxation must lie in (0, 2]")


@dataclass
class SolveReport:
    f: np.ndarray
    residual_norm: float
    solution_norm: float
    iterations: int
    wall_time_seconds: float
    method: str
    mode: str
    history: List[float] = field(default_factory=list, repr=False)
    branches: dict = field(default_factory=dict, repr=False)


def default_workers() -> int:
    env = os.environ.get("SYMSPLIT_PARALLEL")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _residual(A: Matrix, f: np.ndarray, p: np.ndarray) -> float:
    return float(np.linalg.norm(A @ f - p))


def _dense(A: Matrix, cap: int) -> np.ndarray:
    M, N = A.shape
    if M * N > cap:
        raise SolverError(f"dense solve of {M}x{N} exceeds the cap of {cap} entries")
    return A.toarray() if is_sparse(A) else np.asarray(A)


def pseudo_solve_dense(A: Matrix, p: Any, cap: int = DENSE_CAP) -> np.ndarray:
    """Minimum-norm least-squares solution via SVD-based LAPACK ``gelsd``.

    Singular values below ``max(M, N) * eps * sigma_max`` count as zero.
    """
    A = as_matrix(A)
    p = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise ValueError("rhs contains non-finite values")
    a = _dense(A, cap)
    rcond = max(a.shape) * np.finfo(np.float64).eps
    f, _, _, _ = sla.lstsq(a, p, cond=rcond, lapack_driver="gelsd", check_finite=False)
    return f


def cgls_solve(A: Matrix, p: Any, opts: SolveOptions = SolveOptions(method="cgls")) -> SolveReport:
    """Conjugate gradients on the normal equations, started from zero.

    Iterates stay in the row space of ``A``, so the limit is the
    minimum-norm least-squares solution.  Stops once
    ``||A^T r|| <= tol * ||A^T p||``.  ``history`` holds ``||p - A f_k||``
    per iteration (starting with k = 0).
    """
    t0 = time.perf_counter()
    A = as_matrix(A)
    p = np.asarray(p, dtype=np.float64)
    M, N = A.shape
    AT = A.T.tocsr() if is_sparse(A) else np.ascontiguousarray(A.T)
    f = np.zeros(N)
    r = p.copy()
    s = AT @ r
    d = s.copy()
    gamma = float(s @ s)
    if not np.isfinite(gamma):
        raise SolverError("CGLS cannot start: |A^T p| is not finite")
    stop = opts.tol * np.sqrt(gamma)
    history = [float(np.linalg.norm(r))]
    it = 0
    while it < opts.max_iters and np.sqrt(gamma) > stop and gamma > 0:
        q = A @ d
        qq = float(q @ q)
        if not np.isfinite(qq):
            raise SolverError(f"CGLS diverged at iteration {it + 1} (|A d|^2 = {qq})")
        if qq == 0:
            break
        alpha = gamma / qq
        f += alpha * d
        r -= alpha * q
        s = AT @ r
        gamma_new = float(s @ s)
        it += 1
        if not np.isfinite(gamma_new) or not np.all(np.isfinite(f)):
            raise SolverError(f"CGLS diverged at iteration {it} (|A^T r|^2 = {gamma_new})")
        history.append(float(np.linalg.norm(r)))
        d = s + (gamma_new / gamma) * d
        gamma = gamma_new
    wall = time.perf_counter() - t0
    return SolveReport(
        f=f,
        residual_norm=_residual(A, f, p),
        solution_norm=float(np.linalg.norm(f)),
        iterations=it,
        wall_time_seconds=wall,
        method="cgls",
        mode="direct",
        history=history,
    )


def sart_solve(A: Matrix, p: Any, opts: SolveOptions = SolveOptions(method="sart")) -> SolveReport:
    """Simultaneous algebraic reconstruction, started from zero.

    ``f <- f + lam * C^-1 A^T R^-1 (p - A f)`` with ``R``, ``C`` the row and
    column sums of ``|A|``.  Absolute sums keep the update convergent for the
    signed matrices produced by splitting; for nonnegative ``A`` they are the
    usual sums.  Empty rows and columns are left out of the update.
    """
    t0 = time.perf_counter()
    A = as_matrix(A)
    p = np.asarray(p, dtype=np.float64)
    absA = abs(A)
    row = np.asarray(absA.sum(axis=1)).ravel()
    col = np.asarray(absA.sum(axis=0)).ravel()
    if not np.any(row > 0):
        raise SolverError("SART needs a matrix with at least one nonzero entry")
    inv_row = np.divide(1.0, row, out=np.zeros_like(row), where=row > 0)
    inv_col = np.divide(1.0, col, out=np.zeros_like(col), where=col > 0)
    AT = A.T.tocsr() if is_sparse(A) else np.ascontiguousarray(A.T)
    f = np.zeros(A.shape[1])
    r = p.copy()
    pnorm = np.linalg.norm(p)
    history = [float(np.linalg.norm(r))]
    it = 0
    while it < opts.max_iters:
        f += opts.relaxation * inv_col * (AT @ (inv_row * r))
        r = p - A @ f
        it += 1
        rn = float(np.linalg.norm(r))
        if not np.isfinite(rn):
            raise SolverError(f"SART diverged at iteration {it}")
        history.append(rn)
        if rn <= opts.tol * pnorm:
            break
    wall = time.perf_counter() - t0
    return SolveReport(
        f=f,
        residual_norm=_residual(A, f, p),
        solution_norm=float(np.linalg.norm(f)),
        iterations=it,
        wall_time_seconds=wall,
        method="sart",
        mode="direct",
        history=history,
    )


def _solve_one(A: Matrix, p: np.ndarray, opts: SolveOptions) -> SolveReport:
    if opts.method == "dense_minnorm":
        t0 = time.perf_counter()
        f = pseudo_solve_dense(A, p, cap=opts.dense_cap)
        wall = time.perf_counter() - t0
        return SolveReport(
            f=f,
            residual_norm=_residual(A, f, p),
            solution_norm=float(np.linalg.norm(f)),
            iterations=1,
            wall_time_seconds=wall,
            method=opts.method,
            mode="direct",
        )
    if opts.method == "cgls":
        return cgls_solve(A, p, opts)
    return sart_solve(A, p, opts)


def solve_direct(sys: CentroSymmetricSystem, opts: SolveOptions = SolveOptions()) -> SolveReport:
    """Solve the full system with the chosen method."""
    return _solve_one(sys.A, sys.p, opts)


def solve_split(
    sys: CentroSymmetricSystem,
    opts: SolveOptions = SolveOptions(),
    workers: Optional[int] = None,
) -> SolveReport:
    """Split, solve both quarter-size systems, recombine.

    With ``workers >= 2`` the two branches run on separate threads.  Each
    branch is an isolated deterministic computation, so the result does not
    depend on scheduling.  ``wall_time_seconds`` covers the whole call:
    split, both branches and recombination.
    """
    t0 = time.perf_counter()
    split = split_system(sys)
    workers = default_workers() if workers is None else workers
    tasks = {"odd": (split.A1, split.p1), "even": (split.A2, split.p2)}
    results, errors = {}, {}
    if workers >= 2:
        with ThreadPoolExecutor(max_workers=2) as pool:
            futures = {k: pool.submit(_solve_one, A, p, opts) for k, (A, p) in tasks.items()}
            for k, fut in futures.items():
                try:
                    results[k] = fut.result()
                except Exception as exc:  # collect both branch failures
                    errors[k] = exc
    else:
        for k, (A, p) in tasks.items():
            try:
                results[k] = _solve_one(A, p, opts)
            except Exception as exc:
                errors[k] = exc
    if errors:
        raise SplitSolveError(errors)
    f = recombine_solution(SolutionPair(results["odd"].f, results["even"].f))
    wall = time.perf_counter() - t0
    for rep in results.values():
        rep.mode = "split-branch"
    return SolveReport(
        f=f,
        residual_norm=_residual(sys.A, f, sys.p),
        solution_norm=float(np.linalg.norm(f)),
        iterations=max(r.iterations for r in results.values()),
        wall_time_seconds=wall,
        method=opts.method,
        mode="split",
        branches=results,
    )


def solve(sys: CentroSymmetricSystem, mode: str, opts: SolveOptions = SolveOptions(),
          workers: Optional[int] = None) -> SolveReport:
    if mode == "direct":
        return solve_direct(sys, opts)
    if mode == "split":
        return solve_split(sys, opts, workers)
    raise ValueError(f"unknown mode {mode!r}")
