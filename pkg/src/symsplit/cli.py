"""Command-line entry point: ``symsplit {example1,build,solve,bench,recon}``.

Exit codes: 0 success, 1 check failure, 2 usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import statistics
import sys

import numpy as np

from . import io as sio
from .bench import default_options, phantom_system, rel_error, run_case
from .core import (
    CentroSymmetricSystem,
    SolutionPair,
    SymmetryError,
    norm_identity,
    recombine_solution,
    split_system,
    verify_symmetry,
)
from .geometry import GeometryError, build_system, load_config
from .phantom import forward_project, rasterize, shepp_logan_ellipses, symmetric_shepp_logan
from .solvers import SolveOptions, SolverError, pseudo_solve_dense, solve

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

EXAMPLE1_A = np.array([
    [1, 3, 5, 7, 9, 1],
    [2, 4, 6, 8, 3, 7],
    [7, 3, 8, 6, 4, 2],
    [1, 9, 7, 5, 3, 1],
], dtype=float)
EXAMPLE1_P = np.array([5, 6, 8, 7], dtype=float)
EXAMPLE1_A1 = np.array([[0, -6, -2], [-5, 1, -2]], dtype=float)
EXAMPLE1_P1 = np.array([-2, -2], dtype=float)
EXAMPLE1_A2 = np.array([[2, 12, 12], [9, 7, 14]], dtype=float)
EXAMPLE1_P2 = np.array([12, 14], dtype=float)
EXAMPLE1_F1 = (0.3512, 0.2508, 0.2475)
EXAMPLE1_F2 = (0.3542, 0.3373, 0.6036)
EXAMPLE1_F = (0.3527, 0.2941, 0.4256, 0.1781, 0.0433, 0.0015)
EXAMPLE1_NORMS = (0.4975, 0.7769, 0.6523)

METHOD_ALIASES = {"dense": "dense_minnorm", "dense_minnorm": "dense_minnorm", "cgls": "cgls", "sart": "sart"}
PHANTOMS = {"shepp-logan": shepp_logan_ellipses, "symmetric-shepp-logan": symmetric_shepp_logan,
            "zero": lambda: []}


class CheckFailed(Exception):
    pass


def _emit(args, payload: dict, lines):
    if args.json:
        print(json.dumps(payload, indent=2, default=float))
    else:
        for line in lines:
            print(line)


def _workers(args) -> int:
    if args.parallel is not None:
        return max(1, args.parallel)
    env = os.environ.get("SYMSPLIT_PARALLEL")
    return max(1, int(env)) if env else (os.cpu_count() or 1)


def cmd_example1(args) -> int:
    p = EXAMPLE1_P.copy()
    p[0] += args.perturb
    sys_ = CentroSymmetricSystem(EXAMPLE1_A, p, symmetry_tol=0.0)
    split = split_system(sys_)
    f1 = pseudo_solve_dense(split.A1, split.p1)
    f2 = pseudo_solve_dense(split.A2, split.p2)
    pair = SolutionPair(f1, f2)
    f = recombine_solution(pair)
    ni = norm_identity(pair, f)
    norms = (np.linalg.norm(f1), np.linalg.norm(f2), np.linalg.norm(f))

    rows = []

    def check(name, got, want, tol):
        got, want = np.atleast_1d(got), np.atleast_1d(np.asarray(want, dtype=float))
        diff = float(np.max(np.abs(got - want)))
        rows.append({"quantity": name, "computed": got.tolist(), "expected": want.tolist(),
                     "max_diff": diff, "tol": tol, "pass": diff <= tol})

    check("A1", split.A1.ravel(), EXAMPLE1_A1.ravel(), 0.0)
    check("p1", split.p1, EXAMPLE1_P1, 0.0)
    check("A2", split.A2.ravel(), EXAMPLE1_A2.ravel(), 0.0)
    check("p2", split.p2, EXAMPLE1_P2, 0.0)
    check("f1", f1, EXAMPLE1_F1, 1e-4)
    check("f2", f2, EXAMPLE1_F2, 1e-4)
    check("f", f, EXAMPLE1_F, 5e-5)
    check("|f1|", norms[0], EXAMPLE1_NORMS[0], 1e-4)
    check("|f2|", norms[1], EXAMPLE1_NORMS[1], 1e-4)
    check("|f|", norms[2], EXAMPLE1_NORMS[2], 1e-4)
    rows.append({"quantity": "norm identity rel_err", "computed": [ni.rel_err], "expected": [0.0],
                 "max_diff": ni.rel_err, "tol": 1e-12, "pass": ni.rel_err <= 1e-12})
    ok = all(r["pass"] for r in rows)
    lines = [f"{'quantity':<22} {'status':<5} {'max_diff':>10}  computed / expected"]
    for r in rows:
        comp = ", ".join(f"{v:.4f}" for v in r["computed"])
        expected = ", ".join(f"{v:.4f}" for v in r["expected"])
        lines.append(f"{r['quantity']:<22} {'PASS' if r['pass'] else 'FAIL':<5} {r['max_diff']:>10.2e}  ({comp}) / ({expected})")
    lines.append("PASS" if ok else "FAIL")
    _emit(args, {"pass": ok, "checks": rows}, lines)
    return EXIT_OK if ok else EXIT_CHECK


def cmd_build(args) -> int:
    geom, grid = load_config(args.config)
    sys_ = build_system(geom, grid, workers=_workers(args))
    sio.write_matrix_market(sys_.A, args.out_matrix)
    split = split_system(sys_)
    report = verify_symmetry(sys_.A, 0.0)
    payload = {
        "M": sys_.meta["M"], "N": sys_.meta["N"], "nnz": sys_.meta["nnz"],
        "fill_A": split.meta["fill_A"], "fill_A1": split.meta["fill_A1"], "fill_A2": split.meta["fill_A2"],
        "symmetric": report.holds, "max_violation": report.max_violation,
    }
    if args.phantom:
        truth = rasterize(PHANTOMS[args.phantom](), grid)
        p = forward_project(sys_.A, truth, noise_sigma=args.noise, seed=args.seed)
        if args.out_rhs:
            sio.write_vector_csv(p, args.out_rhs)
        if args.out_truth:
            sio.write_vector_csv(truth.values, args.out_truth)
        payload["rhs_norm"] = float(np.linalg.norm(p))
    lines = [f"{k}: {v}" for k, v in payload.items()]
    _emit(args, payload, lines)
    return EXIT_OK if report.holds else EXIT_CHECK


def _options(args) -> SolveOptions:
    kw = {"method": METHOD_ALIASES[args.method]}
    for name in ("tol", "max_iters", "relaxation"):
        if getattr(args, name, None) is not None:
            kw[name] = getattr(args, name)
    return SolveOptions(**kw)


def cmd_solve(args) -> int:
    A = sio.read_matrix_market(args.matrix)
    p = sio.read_vector_csv(args.rhs)
    if p.size != A.shape[0]:
        raise ValueError(f"rhs has {p.size} entries, matrix has {A.shape[0]} rows")
    sys_ = CentroSymmetricSystem(A, p, symmetry_tol=args.symmetry_tol)
    rep = solve(sys_, args.mode, _options(args), workers=_workers(args))
    if args.out:
        sio.write_vector_csv(rep.f, args.out)
    payload = {
        "mode": rep.mode, "method": rep.method, "M": A.shape[0], "N": A.shape[1],
        "residual_norm": rep.residual_norm,
        "relative_residual": rep.residual_norm / max(np.linalg.norm(p), np.finfo(float).tiny),
        "solution_norm": rep.solution_norm, "iterations": rep.iterations,
        "wall_time_seconds": rep.wall_time_seconds,
    }
    if args.truth:
        truth = sio.read_vector_csv(args.truth)
        payload["relative_error"] = rel_error(rep.f, truth)
    _emit(args, payload, [f"{k}: {v}" for k, v in payload.items()])
    return EXIT_OK


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s]
    modes = [m for m in args.modes.split(",") if m]
    for m in modes:
        if m not in ("direct", "split"):
            raise ValueError(f"unknown mode {m!r}")
    workers = _workers(args)
    records, summary = [], []
    for n in sizes:
        sys_, truth = phantom_system(n, workers=workers)
        opts = default_options(n) if args.method == "auto" else SolveOptions(method=METHOD_ALIASES[args.method])
        label = f"{n}x{n}"
        res = run_case(sys_, truth, label, modes, opts, args.reps, workers)
        records.extend(res.records)
        entry = {"label": label, "M": sys_.A.shape[0], "N": sys_.A.shape[1], "method": opts.method}
        for r in res.records:
            t = res.times[r.mode]
            entry[r.mode] = {"min": min(t), "median": statistics.median(t), "max": max(t),
                             "rel_error": r.rel_error, "residual_norm": r.residual_norm}
        missing = [m for m in modes if m not in res.times]
        if missing:
            entry["skipped"] = missing
        if res.speedup() is not None:
            entry["speedup"] = res.speedup()
        summary.append(entry)
        print(f"[bench] {label} done", file=sys.stderr)
    if args.out:
        fmt = "json" if str(args.out).endswith(".json") else "csv"
        sio.write_bench_report(records, args.out, fmt)
    lines = []
    for e in summary:
        line = f"{e['label']} A={e['M']}x{e['N']} method={e['method']}"
        for m in ("direct", "split"):
            if m in e:
                d = e[m]
                line += (f" | {m}: {d['min']:.4f}s (median {d['median']:.4f}, max {d['max']:.4f})"
                         f" err={d['rel_error']:.3e}")
        if "speedup" in e:
            line += f" | speedup={e['speedup']:.2f}x"
        if "skipped" in e:
            line += f" | skipped {','.join(e['skipped'])}"
        lines.append(line)
    _emit(args, {"cases": summary, "records": [vars(r) for r in records]}, lines)
    return EXIT_OK


def cmd_recon(args) -> int:
    geom, grid = load_config(args.config)
    sys_ = build_system(geom, grid, workers=_workers(args))
    truth = rasterize(PHANTOMS[args.phantom](), grid)
    p = forward_project(sys_.A, truth, noise_sigma=args.noise, seed=args.seed)
    sys_ = CentroSymmetricSystem(sys_.A, p, symmetry_tol=0.0)
    rep = solve(sys_, args.mode, _options(args), workers=_workers(args))
    sio.write_pgm(rep.f, grid, args.out_image)
    err = rel_error(rep.f, truth.values)
    payload = {"M": sys_.A.shape[0], "N": sys_.A.shape[1], "mode": rep.mode, "method": rep.method,
               "relative_error": err, "residual_norm": rep.residual_norm,
               "wall_time_seconds": rep.wall_time_seconds, "image": str(args.out_image)}
    _emit(args, payload, [f"{k}: {v}" for k, v in payload.items()])
    return EXIT_OK


def _add_solver_flags(sp, default_method="dense"):
    sp.add_argument("--method", choices=sorted(METHOD_ALIASES), default=default_method)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--max-iters", type=int)
    sp.add_argument("--relaxation", type=float)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--parallel", type=int, help="worker cap (default: $SYMSPLIT_PARALLEL or all cores)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="symsplit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("example1", parents=[common], help="worked 4x6 example")
    ex.add_argument("--perturb", type=float, default=0.0, help=argparse.SUPPRESS)
    ex.set_defaults(func=cmd_example1)

    b = sub.add_parser("build", parents=[common], help="build the system matrix from a geometry config")
    b.add_argument("--config", required=True)
    b.add_argument("--out-matrix", required=True)
    b.add_argument("--out-rhs")
    b.add_argument("--out-truth")
    b.add_argument("--phantom", choices=sorted(PHANTOMS))
    b.add_argument("--noise", type=float, default=None, help="gaussian sigma added to projections")
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_build)

    s = sub.add_parser("solve", parents=[common], help="solve a stored system")
    s.add_argument("--matrix", required=True)
    s.add_argument("--rhs", required=True)
    s.add_argument("--mode", choices=("direct", "split"), default="split")
    _add_solver_flags(s)
    s.add_argument("--symmetry-tol", type=float, default=1e-12)
    s.add_argument("--out")
    s.add_argument("--truth")
    s.set_defaults(func=cmd_solve)

    be = sub.add_parser("bench", parents=[common], help="direct vs split timing on phantom cases")
    be.add_argument("--sizes", default="32,64")
    be.add_argument("--modes", default="direct,split")
    be.add_argument("--reps", type=int, default=5)
    be.add_argument("--method", choices=["auto"] + sorted(METHOD_ALIASES), default="auto")
    be.add_argument("--out")
    be.set_defaults(func=cmd_bench)

    r = sub.add_parser("recon", parents=[common], help="build, project, split-solve, write PGM")
    r.add_argument("--config", required=True)
    r.add_argument("--out-image", required=True)
    r.add_argument("--mode", choices=("direct", "split"), default="split")
    r.add_argument("--phantom", choices=sorted(PHANTOMS), default="shepp-logan")
    r.add_argument("--noise", type=float, default=None)
    r.add_argument("--seed", type=int, default=0)
    _add_solver_flags(r)
    r.set_defaults(func=cmd_recon)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SymmetryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (OSError, sio.FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (GeometryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
