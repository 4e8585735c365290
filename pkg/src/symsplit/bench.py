"""Direct-versus-split timing on the Shepp-Logan tomosynthesis cases."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .core import CentroSymmetricSystem
from .geometry import build_system, benchmark_case
from .io import BenchRecord
from .phantom import forward_project, rasterize, shepp_logan_ellipses
from .solvers import SolveOptions, SolveReport, SolverError, solve

log = logging.getLogger(__name__)


def phantom_system(n: int, workers: int = 1, ellipses=None):
    """Build the n x n case and attach noise-free projections of the phantom."""
    geom, grid = benchmark_case(n)
    sys = build_system(geom, grid, workers=workers)
    truth = rasterize(shepp_logan_ellipses() if ellipses is None else ellipses, grid)
    p = forward_project(sys.A, truth)
    sys = CentroSymmetricSystem(sys.A, p, symmetry_tol=0.0, meta=sys.meta)
    return sys, truth.values


def rel_error(f: np.ndarray, truth: np.ndarray) -> float:
    denom = np.linalg.norm(truth)
    return float(np.linalg.norm(f - truth) / denom) if denom > 0 else float(np.linalg.norm(f))


@dataclass
class CaseResult:
    label: str
    records: List[BenchRecord]
    times: Dict[str, List[float]] = field(default_factory=dict)
    solutions: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def speedup(self) -> Optional[float]:
        t = {r.mode: r.wall_time_seconds for r in self.records}
        if "direct" in t and "split" in t and t["split"] > 0:
            return t["direct"] / t["split"]
        return None


def default_options(n: int) -> SolveOptions:
    """Dense minimum-norm up to 32 x 32, CGLS beyond.

    The CGLS tolerance is tight enough that both modes converge; a loose
    tolerance stops both at the iteration cap and times equal work.
    """
    if n <= 32:
        return SolveOptions(method="dense_minnorm")
    return SolveOptions(method="cgls", tol=1e-10, max_iters=10_000)


def run_case(
    sys: CentroSymmetricSystem,
    truth: Optional[np.ndarray],
    label: str,
    modes: Sequence[str] = ("direct", "split"),
    opts: SolveOptions = SolveOptions(),
    reps: int = 5,
    workers: Optional[int] = None,
) -> CaseResult:
    """Time each mode ``reps`` times and keep the fastest run."""
    M, N = sys.A.shape
    nnz = int(sys.A.nnz) if hasattr(sys.A, "nnz") else int(np.count_nonzero(sys.A))
    result = CaseResult(label, [])
    for mode in modes:
        best: Optional[SolveReport] = None
        times = []
        for _ in range(reps):
            try:
                rep = solve(sys, mode, opts, workers)
            except SolverError as exc:
                log.warning("skipping %s/%s: %s", label, mode, exc)
                break
            times.append(rep.wall_time_seconds)
            if best is None or rep.wall_time_seconds < best.wall_time_seconds:
                best = rep
        if best is None:
            continue
        result.times[mode] = times
        result.solutions[mode] = best.f
        result.records.append(BenchRecord(
            label=label,
            rows=M,
            cols=N,
            nnz=nnz,
            method=opts.method,
            mode=mode,
            wall_time_seconds=min(times),
            residual_norm=best.residual_norm,
            rel_error=None if truth is None else rel_error(best.f, truth),
            reps=len(times),
        ))
    return result
