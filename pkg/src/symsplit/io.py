"""Matrix Market, vector, PGM and benchmark-report serialization."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np
import scipy.sparse as sp

from .geometry import GridSpec, desnake

MM_HEADER = "%%MatrixMarket matrix coordinate real general"


class FormatError(ValueError):
    def __init__(self, path, lineno: int, msg: str):
        self.path, self.lineno = path, lineno
        super().__init__(f"{path}:{lineno}: {msg}")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_matrix_market(A, path) -> None:
    """Coordinate format, 1-based, entries sorted by (row, col); explicit zeros dropped."""
    C = sp.coo_matrix(A)
    C.sum_duplicates()
    keep = C.data != 0
    rows, cols, vals = C.row[keep], C.col[keep], C.data[keep]
    order = np.lexsort((cols, rows))
    lines = [MM_HEADER, f"{C.shape[0]} {C.shape[1]} {order.size}"]
    lines += [f"{rows[k] + 1} {cols[k] + 1} {_fmt(vals[k])}" for k in order]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_matrix_market(path) -> sp.csr_matrix:
    """Read a real general coordinate file; errors carry the offending line number."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0].strip().lower() != MM_HEADER.lower():
        raise FormatError(path, 1, f"expected header {MM_HEADER!r}")
    lineno, size = 1, None
    for lineno in range(2, len(text) + 1):
        line = text[lineno - 1].strip()
        if line and not line.startswith("%"):
            size = line.split()
            break
    if size is None:
        raise FormatError(path, lineno, "missing size line")
    try:
        M, N, nnz = (int(s) for s in size)
    except ValueError:
        raise FormatError(path, lineno, f"bad size line {' '.join(size)!r}") from None
    if M < 1 or N < 1 or nnz < 0:
        raise FormatError(path, lineno, "non-positive shape")
    body = [(n, s) for n, s in enumerate(text[lineno:], lineno + 1)
            if s.strip() and not s.lstrip().startswith("%")]
    try:
        table = np.array(" ".join(s for _, s in body).split(), dtype=np.float64).reshape(-1, 3)
        ok = table.shape[0] == len(body) == nnz and all(len(b.split()) == 3 for _, b in body)
    except ValueError:
        ok = False
    if ok:
        rows = table[:, 0].astype(np.int64)
        cols = table[:, 1].astype(np.int64)
        vals = table[:, 2]
        keys = rows * (N + 1) + cols
        ok = (
            np.array_equal(rows, table[:, 0]) and np.array_equal(cols, table[:, 1])
            and rows.min(initial=1) >= 1 and rows.max(initial=1) <= M
            and cols.min(initial=1) >= 1 and cols.max(initial=1) <= N
            and np.all(np.isfinite(vals)) and np.unique(keys).size == nnz
        )
    if not ok:
        _diagnose(path, body, M, N, nnz, len(text))
    A = sp.csr_matrix((vals, (rows - 1, cols - 1)), shape=(M, N))
    A.sort_indices()
    return A


def _diagnose(path, body, M, N, nnz, last_line):
    seen = {}
    for k, (n, line) in enumerate(body):
        if k == nnz:
            raise FormatError(path, n, f"more than the declared {nnz} entries")
        parts = line.split()
        try:
            if len(parts) != 3:
                raise ValueError
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise FormatError(path, n, f"malformed entry {line.strip()!r}") from None
        if not (1 <= i <= M and 1 <= j <= N):
            raise FormatError(path, n, f"index ({i}, {j}) outside {M}x{N}")
        if not math.isfinite(v):
            raise FormatError(path, n, "non-finite value")
        if (i, j) in seen:
            raise FormatError(path, n, f"duplicate entry ({i}, {j}), first on line {seen[i, j]}")
        seen[i, j] = n
    raise FormatError(path, last_line, f"expected {nnz} entries, found {len(body)}")


def write_vector_csv(v, path) -> None:
    v = np.asarray(v, dtype=np.float64).ravel()
    body = "".join(_fmt(x) + "\n" for x in v)
    Path(path).write_text(body, encoding="utf-8", newline="\n")


def read_vector_csv(path) -> np.ndarray:
    out = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            out.append(float(line))
        except ValueError:
            raise FormatError(path, n, f"not a number: {line!r}") from None
    return np.array(out, dtype=np.float64)


def to_gray(image: np.ndarray) -> np.ndarray:
    """Min-max rescale to 0..255; a constant image maps to all zeros."""
    image = np.asarray(image, dtype=np.float64)
    lo, hi = image.min(), image.max()
    if hi == lo:
        return np.zeros(image.shape, dtype=np.uint8)
    return np.rint((image - lo) / (hi - lo) * 255).astype(np.uint8)


def write_pgm(values, grid: GridSpec, path) -> np.ndarray:
    """De-snake ``values`` and write an 8-bit binary PGM; returns the pixel array."""
    values = np.asarray(getattr(values, "values", values), dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot write an empty image")
    if not np.all(np.isfinite(values)):
        raise ValueError("image contains non-finite values")
    pixels = to_gray(desnake(values, grid))
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
    return pixels


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end : end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval > 255:
        raise ValueError(f"{path}: 16-bit PGM not supported")
    raster = data[pos + 1 : pos + 1 + w * h]
    if len(raster) != w * h:
        raise ValueError(f"{path}: truncated raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w)


@dataclass
class BenchRecord:
    label: str
    rows: int
    cols: int
    nnz: int
    method: str
    mode: str
    wall_time_seconds: float
    residual_norm: float
    rel_error: Optional[float] = None
    reps: int = 1


REPORT_COLUMNS = [f.name for f in fields(BenchRecord)]


def write_bench_report(records: Iterable[BenchRecord], path, format: str = "csv") -> None:
    records = list(records)
    if format == "json":
        payload = [asdict(r) for r in records]
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        return
    if format != "csv":
        raise ValueError(f"unknown report format {format!r}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for r in records:
            writer.writerow(["" if v is None else repr(v) if isinstance(v, float) else v
                             for v in asdict(r).values()])


def read_bench_report(path) -> List[BenchRecord]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if text.lstrip().startswith("["):
        return [BenchRecord(**d) for d in json.loads(text)]
    out = []
    for row in csv.DictReader(text.splitlines()):
        out.append(BenchRecord(
            label=row["label"],
            rows=int(row["rows"]),
            cols=int(row["cols"]),
            nnz=int(row["nnz"]),
            method=row["method"],
            mode=row["mode"],
            wall_time_seconds=float(row["wall_time_seconds"]),
            residual_norm=float(row["residual_norm"]),
            rel_error=float(row["rel_error"]) if row["rel_error"] else None,
            reps=int(row["reps"]),
        ))
    return out
