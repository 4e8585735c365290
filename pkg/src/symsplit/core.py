"""Centrosymmetric splitting of tomographic linear systems.

A matrix ``A`` of shape (M, N) with M, N even is centrosymmetric when
``w[i, j] == w[M-i+1, N-j+1]`` (1-based).  For such a matrix the system
``A f = p`` decouples into two independent (M/2, N/2) systems

    A1 = A[top, left] - A[bottom mirrored, left]     p1 = p_top - p_bottom mirrored
    A2 = A[top, left] + A[bottom mirrored, left]     p2 = p_top + p_bottom mirrored

whose solutions recombine into a solution (and, for minimum-norm least
squares solutions, into *the* minimum-norm solution) of the full system.

Every index reported to callers is 1-based; storage is 0-based.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any, Optional, Tuple, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

Matrix = Union[np.ndarray, sp.spmatrix, sp.sparray]

DEFAULT_SYMMETRY_TOL = 1e-12


class SymmetryError(ValueError):
    """Raised when a matrix is not centrosymmetric within tolerance."""

    def __init__(self, report: "SymmetryReport"):
        self.report = report
        if report.reason == "odd_dimensions":
            msg = f"matrix shape {report.shape} has an odd dimension"
        else:
            msg = (
                f"symmetry violated: max |w[i,j] - w[M-i+1,N-j+1]| = "
                f"{report.max_violation:.6g} at {report.worst_index} "
                f"(tol {report.tol:.3g})"
            )
        super().__init__(msg)


def is_sparse(A: Any) -> bool:
    return sp.issparse(A)


def as_matrix(A: Any) -> Matrix:
    """Coerce input to a float64 dense array or a canonical CSR matrix."""
    if is_sparse(A):
        A = sp.csr_matrix(A, dtype=np.float64)
        A.sum_duplicates()
        A.sort_indices()
    else:
        A = np.array(A, dtype=np.float64)
        if A.ndim != 2:
            raise ValueError(f"matrix must be 2-D, got shape {A.shape}")
    if A.shape[0] * A.shape[1] == 0:
        raise ValueError(f"matrix must be non-empty, got shape {A.shape}")
    data = A.data if is_sparse(A) else A
    if not np.all(np.isfinite(data)):
        raise ValueError("matrix contains non-finite values")
    return A


def fill_ratio(A: Matrix) -> float:
    """Stored nonzeros divided by rows*cols."""
    nnz = A.count_nonzero() if is_sparse(A) else np.count_nonzero(A)
    return nnz / (A.shape[0] * A.shape[1])


def _flip(A: Matrix) -> Matrix:
    """Simultaneous row and column reversal."""
    if not is_sparse(A):
        return A[::-1, ::-1]
    M, N = A.shape
    C = sp.coo_matrix(A)
    return sp.csr_matrix((C.data, (M - 1 - C.row, N - 1 - C.col)), shape=A.shape)


@dataclass(frozen=True)
class SymmetryReport:
    max_violation: float
    holds: bool
    worst_index: Tuple[int, int]
    tol: float
    shape: Tuple[int, int]
    reason: str  # "ok", "violation" or "odd_dimensions"


def verify_symmetry(A: Matrix, tol: float = 0.0) -> SymmetryReport:
    """Check ``w[i,j] == w[M-i+1, N-j+1]`` for every entry.

    Odd dimensions never hold.  ``worst_index`` is the 1-based position of
    the first largest violation.
    """
    A = as_matrix(A)
    M, N = A.shape
    D = A - _flip(A)
    if is_sparse(D):
        D = sp.coo_matrix(D)
        if D.nnz:
            k = int(np.argmax(np.abs(D.data)))
            worst = float(abs(D.data[k]))
            # the mirror entry carries the same magnitude; report the smaller index
            i, j = int(D.row[k]), int(D.col[k])
            i, j = min((i, j), (M - 1 - i, N - 1 - j))
        else:
            worst, i, j = 0.0, 0, 0
    else:
        absd = np.abs(D)
        i, j = np.unravel_index(int(np.argmax(absd)), absd.shape)
        worst = float(absd[i, j])
    if M % 2 or N % 2:
        reason, holds = "odd_dimensions", False
    elif worst <= tol:
        reason, holds = "ok", True
    else:
        reason, holds = "violation", False
    return SymmetryReport(worst, holds, (int(i) + 1, int(j) + 1), tol, (M, N), reason)


def symmetrize(A: Matrix) -> Matrix:
    """Average each entry with its mirror so the result is exactly centrosymmetric."""
    A = as_matrix(A)
    S = (A + _flip(A)) * 0.5
    if is_sparse(S):
        S = sp.csr_matrix(S)
        S.eliminate_zeros()
    return S


def _as_vector(v: Any, name: str) -> np.ndarray:
    v = np.array(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite values")
    return v


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CentroSymmetricSystem:
    """A linear system ``A f = p`` with even M and N.

    Symmetry is not enforced at construction, so externally numbered systems
    can be held and permuted; :func:`split_system` refuses anything that
    fails :meth:`symmetry` at ``symmetry_tol``.
    """

    A: Matrix
    p: np.ndarray
    symmetry_tol: float = DEFAULT_SYMMETRY_TOL
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        A = as_matrix(self.A)
        p = _as_vector(self.p, "p")
        M, N = A.shape
        if M % 2 or N % 2:
            raise ValueError(f"M and N must be even, got shape {A.shape}")
        if p.shape[0] != M:
            raise ValueError(f"rhs length {p.shape[0]} does not match {M} rows")
        if self.symmetry_tol < 0:
            raise ValueError("symmetry_tol must be non-negative")
        if not is_sparse(A):
            A = _frozen(A)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "p", _frozen(p))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.A.shape

    def symmetry(self) -> SymmetryReport:
        return verify_symmetry(self.A, self.symmetry_tol)


@dataclass(frozen=True)
class SplitSystem:
    A1: Matrix
    p1: np.ndarray
    A2: Matrix
    p2: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.A1.shape != self.A2.shape:
            raise ValueError(f"A1 {self.A1.shape} and A2 {self.A2.shape} differ in shape")
        if self.p1 is not None and len(self.p1) != self.A1.shape[0]:
            raise ValueError("p1 length does not match A1 rows")
        if self.p2 is not None and len(self.p2) != self.A2.shape[0]:
            raise ValueError("p2 length does not match A2 rows")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.A1.shape


@dataclass(frozen=True)
class SolutionPair:
    """Odd (``f1``) and even (``f2``) halves of a length-N solution."""

    f1: np.ndarray
    f2: np.ndarray

    def __post_init__(self):
        f1 = _as_vector(self.f1, "f1")
        f2 = _as_vector(self.f2, "f2")
        if f1.shape != f2.shape:
            raise ValueError(f"length mismatch: f1 has {f1.size}, f2 has {f2.size}")
        object.__setattr__(self, "f1", _frozen(f1))
        object.__setattr__(self, "f2", _frozen(f2))


def split_rhs(p: Any) -> Tuple[np.ndarray, np.ndarray]:
    """``p1_i = p_i - p_{M-i+1}``, ``p2_i = p_i + p_{M-i+1}`` for i <= M/2."""
    p = _as_vector(p, "p")
    M = p.size
    if M % 2:
        raise ValueError(f"rhs length must be even, got {M}")
    top, mirrored = p[: M // 2], p[::-1][: M // 2]
    return top - mirrored, top + mirrored


def _split_matrix(A: Matrix) -> Tuple[Matrix, Matrix]:
    M, N = A.shape
    Mh, Nh = M // 2, N // 2
    if not is_sparse(A):
        top = A[:Mh, :Nh]
        mirrored = A[::-1][:Mh, :Nh]
        return top - mirrored, top + mirrored
    # one pass over stored entries in the left half; bottom rows fold onto their mirror
    C = sp.coo_matrix(A)
    keep = C.col < Nh
    rows, cols, vals = C.row[keep], C.col[keep], C.data[keep]
    lower = rows >= Mh
    rows = np.where(lower, M - 1 - rows, rows)
    sign = np.where(lower, -1.0, 1.0)
    A1 = sp.csr_matrix((vals * sign, (rows, cols)), shape=(Mh, Nh))
    A2 = sp.csr_matrix((vals, (rows, cols)), shape=(Mh, Nh))
    for B in (A1, A2):
        B.sum_duplicates()
        B.eliminate_zeros()
        B.sort_indices()
    return A1, A2


def split_system(sys: CentroSymmetricSystem) -> SplitSystem:
    """Split a centrosymmetric system into its two quarter-size systems.

    Raises :class:`SymmetryError` if the system fails its own tolerance.
    """
    report = sys.symmetry()
    if not report.holds:
        raise SymmetryError(report)
    A1, A2 = _split_matrix(sys.A)
    p1, p2 = split_rhs(sys.p)
    meta = {
        "fill_A": fill_ratio(sys.A),
        "fill_A1": fill_ratio(A1),
        "fill_A2": fill_ratio(A2),
    }
    return SplitSystem(A1, p1, A2, p2, meta)


def reconstruct_matrix(split: SplitSystem) -> Matrix:
    """Invert the split formulas, returning the parent (M, N) matrix."""
    A1, A2 = split.A1, split.A2
    if A1.shape != A2.shape:
        raise ValueError("A1 and A2 shapes differ")
    Mh, Nh = A1.shape
    M, N = 2 * Mh, 2 * Nh
    if not (is_sparse(A1) or is_sparse(A2)):
        A1 = np.asarray(A1, dtype=np.float64)
        A2 = np.asarray(A2, dtype=np.float64)
        W = np.empty((M, N))
        W[:Mh, :Nh] = (A2 + A1) / 2
        W[M - 1 : Mh - 1 : -1, :Nh] = (A2 - A1) / 2
        W[:, Nh:] = W[::-1, Nh - 1 :: -1]
        return W
    upper = sp.coo_matrix((sp.csr_matrix(A2) + sp.csr_matrix(A1)) / 2)
    lower = sp.coo_matrix((sp.csr_matrix(A2) - sp.csr_matrix(A1)) / 2)
    rows = np.concatenate([upper.row, M - 1 - lower.row])
    cols = np.concatenate([upper.col, lower.col])
    vals = np.concatenate([upper.data, lower.data])
    # right half is the mirror image of the left half
    rows = np.concatenate([rows, M - 1 - rows])
    cols = np.concatenate([cols, N - 1 - cols])
    vals = np.concatenate([vals, vals])
    W = sp.csr_matrix((vals, (rows, cols)), shape=(M, N))
    W.eliminate_zeros()
    W.sort_indices()
    return W


def decompose_solution(f: Any) -> SolutionPair:
    """``f1_j = f_j - f_{N-j+1}``, ``f2_j = f_j + f_{N-j+1}`` for j <= N/2."""
    f = _as_vector(f, "f")
    if f.size % 2:
        raise ValueError(f"solution length must be even, got {f.size}")
    top, mirrored = f[: f.size // 2], f[::-1][: f.size // 2]
    return SolutionPair(top - mirrored, top + mirrored)


def recombine_solution(pair: SolutionPair) -> np.ndarray:
    """Rebuild the length-N solution from its odd and even halves."""
    f1 = np.asarray(pair.f1, dtype=np.float64)
    f2 = np.asarray(pair.f2, dtype=np.float64)
    if f1.shape != f2.shape:
        raise ValueError("length mismatch between f1 and f2")
    return np.concatenate([(f2 + f1) / 2, ((f2 - f1) / 2)[::-1]])


def _lu_det(a: np.ndarray) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(a, check_finite=False)
    swaps = np.count_nonzero(piv != np.arange(piv.size))
    sign = -1.0 if swaps % 2 else 1.0
    return sign * float(np.prod(np.diag(lu)))


@dataclass(frozen=True)
class DetIdentity:
    det_A: float
    det_A1: float
    det_A2: float
    rel_err: float


def check_det_identity(A: Matrix, tol: float = DEFAULT_SYMMETRY_TOL) -> DetIdentity:
    """Compare det(A) with det(A1)*det(A2) for a square centrosymmetric A."""
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    report = verify_symmetry(A, tol)
    if not report.holds:
        raise SymmetryError(report)
    A1, A2 = _split_matrix(A)
    dense = (lambda B: B.toarray()) if is_sparse(A) else np.asarray
    dA, d1, d2 = _lu_det(dense(A)), _lu_det(dense(A1)), _lu_det(dense(A2))
    rel = abs(dA - d1 * d2) / max(1.0, abs(dA))
    return DetIdentity(dA, d1, d2, rel)


@dataclass(frozen=True)
class GramCheck:
    B_symmetric: bool
    B_violation: float
    max_dev1: float
    max_dev2: float


def gram_split_check(A: Matrix, tol: float = 1e-10) -> GramCheck:
    """Check that ``B = A^T A`` is centrosymmetric and splits into ``A1^T A1``, ``A2^T A2``."""
    A = as_matrix(A)
    report = verify_symmetry(A, DEFAULT_SYMMETRY_TOL)
    if not report.holds:
        raise SymmetryError(report)
    if is_sparse(A):
        A = A.toarray()
    A1, A2 = _split_matrix(A)
    B = A.T @ A
    brep = verify_symmetry(B, tol)
    B1, B2 = _split_matrix(B)
    dev1 = float(np.max(np.abs(B1 - A1.T @ A1)))
    dev2 = float(np.max(np.abs(B2 - A2.T @ A2)))
    return GramCheck(brep.holds, brep.max_violation, dev1, dev2)


@dataclass(frozen=True)
class NormIdentity:
    lhs: float
    rhs: float
    rel_err: float


def norm_identity(pair: SolutionPair, f: Optional[Any] = None) -> NormIdentity:
    """``||f||^2`` against ``(||f1||^2 + ||f2||^2) / 2``."""
    if f is None:
        f = recombine_solution(pair)
    f = _as_vector(f, "f")
    lhs = float(f @ f)
    rhs = 0.5 * float(pair.f1 @ pair.f1) + 0.5 * float(pair.f2 @ pair.f2)
    rel = abs(lhs - rhs) / lhs if lhs > 0 else abs(lhs - rhs)
    return NormIdentity(lhs, rhs, rel)
