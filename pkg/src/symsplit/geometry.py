"""2D tomosynthesis geometry and centrosymmetric system-matrix assembly.

Coordinates are in meters.  The detector lies on ``y = 0`` and is centred on
``x = center_x``; the reconstruction region is an ``n_x`` by ``n_y`` block of
square voxels whose lower boundary sits at ``y = h_m``.  The emitter swings
about the centre of that lower boundary at distance ``h_e``, through angles
``-gamma .. +gamma`` measured from the vertical.

Voxels are numbered with a vertical snake: odd columns top-to-bottom, even
columns bottom-to-top, leftmost column first.  With ``n_x`` even this puts the
left-right mirror image of voxel ``j`` at ``N - j + 1``; rays are ordered so
the mirror of ray ``i`` is ray ``M - i + 1``, and the resulting matrix is
centrosymmetric.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .core import CentroSymmetricSystem, fill_ratio

DEFAULT_VOXEL_SIZE = 1e-3


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    n_x: int
    n_y: int
    voxel_size: float = DEFAULT_VOXEL_SIZE
    center_x: float = 0.0
    y_bottom: float = 0.25

    def __post_init__(self):
        if self.n_x < 2 or self.n_x % 2:
            raise GeometryError(f"n_x must be even and positive, got {self.n_x}")
        if self.n_y < 1:
            raise GeometryError(f"n_y must be positive, got {self.n_y}")
        if not self.voxel_size > 0:
            raise GeometryError("voxel_size must be positive")

    @property
    def N(self) -> int:
        return self.n_x * self.n_y

    @property
    def x_edges(self) -> np.ndarray:
        half = self.n_x // 2
        # symmetric about center_x by construction
        right = np.arange(half + 1) * self.voxel_size
        return self.center_x + np.concatenate([-right[:0:-1], right])

    @property
    def y_edges(self) -> np.ndarray:
        return self.y_bottom + np.arange(self.n_y + 1) * self.voxel_size

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        xe, ye = self.x_edges, self.y_edges
        return xe[0], xe[-1], ye[0], ye[-1]


def snake_index(c: int, r: int, grid: GridSpec) -> int:
    """1-based voxel index of column ``c`` (from the left), row ``r`` (from the top)."""
    if not (1 <= c <= grid.n_x and 1 <= r <= grid.n_y):
        raise IndexError(f"cell ({c}, {r}) outside {grid.n_x}x{grid.n_y} grid")
    if c % 2:
        return (c - 1) * grid.n_y + r
    return (c - 1) * grid.n_y + (grid.n_y - r + 1)


def snake_inverse(j: int, grid: GridSpec) -> Tuple[int, int]:
    if not 1 <= j <= grid.N:
        raise IndexError(f"voxel index {j} outside 1..{grid.N}")
    c, k = divmod(j - 1, grid.n_y)
    c += 1
    r = k + 1 if c % 2 else grid.n_y - k
    return c, r


def snake_order(grid: GridSpec) -> np.ndarray:
    """Array ``J[r-1, c-1]`` of 0-based voxel indices laid out as an image."""
    rows = np.arange(grid.n_y)[:, None]
    cols = np.arange(grid.n_x)[None, :]
    down = cols * grid.n_y + rows
    up = cols * grid.n_y + (grid.n_y - 1 - rows)
    return np.where(cols % 2 == 0, down, up)


def desnake(values, grid: GridSpec) -> np.ndarray:
    """Snake-ordered vector to an ``(n_y, n_x)`` image, top row first."""
    values = np.asarray(values)
    if values.shape != (grid.N,):
        raise ValueError(f"expected {grid.N} values, got shape {values.shape}")
    return values[snake_order(grid)]


def ensnake(image, grid: GridSpec) -> np.ndarray:
    image = np.asarray(image)
    if image.shape != (grid.n_y, grid.n_x):
        raise ValueError(f"expected image of shape {(grid.n_y, grid.n_x)}, got {image.shape}")
    out = np.empty(grid.N, dtype=image.dtype)
    out[snake_order(grid)] = image
    return out


@dataclass(frozen=True)
class ScanGeometry:
    K: int = 24
    gamma: float = math.radians(30.0)
    h_e: float = 1.0
    h_m: float = 0.25
    L_m: float = 0.43
    N_p: int = 1024
    a_e: float = 7e-4  # focal spot size; pencil rays ignore it

    def __post_init__(self):
        if self.K < 2 or self.K % 2:
            raise GeometryError(f"K must be even and >= 2 so positions pair up, got {self.K}")
        if not 0 < self.gamma < math.pi / 2:
            raise GeometryError("gamma must lie in (0, pi/2)")
        for name in ("h_e", "h_m", "L_m", "a_e"):
            if not getattr(self, name) > 0:
                raise GeometryError(f"{name} must be positive")
        if self.N_p < 1:
            raise GeometryError("N_p must be positive")


def emitter_angles(geom: ScanGeometry) -> np.ndarray:
    """Evenly spaced angles from -gamma to +gamma; the right half is the exact negation of the left."""
    K = geom.K
    left = -geom.gamma + np.arange(K // 2) * (2 * geom.gamma / (K - 1))
    return np.concatenate([left, -left[::-1]])


def emitter_positions(geom: ScanGeometry, grid: Optional[GridSpec] = None) -> np.ndarray:
    """Source points, shape (K, 2), rotating about the object's lower-boundary centre."""
    cx = grid.center_x if grid is not None else 0.0
    theta = emitter_angles(geom)
    half = theta[: geom.K // 2]
    xs = geom.h_e * np.sin(half)
    ys = geom.h_m + geom.h_e * np.cos(half)
    x = np.concatenate([cx + xs, (cx - xs)[::-1]])
    y = np.concatenate([ys, ys[::-1]])
    return np.column_stack([x, y])


def detector_centers(geom: ScanGeometry, grid: Optional[GridSpec] = None) -> np.ndarray:
    cx = grid.center_x if grid is not None else 0.0
    pitch = geom.L_m / geom.N_p
    offsets = (np.arange(1, geom.N_p + 1) - (geom.N_p + 1) / 2) * pitch
    return cx + offsets


def _clip_params(sx, sy, dx, dy, grid: GridSpec):
    """Parametric entry/exit of segments ``s + t*d`` (t in [0, 1]) through the grid box."""
    x0, x1, y0, y1 = grid.bounds
    lo = np.zeros(np.broadcast(sx, dx).shape)
    hi = np.ones_like(lo)
    for s, d, a, b in ((sx, dx, x0, x1), (sy, dy, y0, y1)):
        s, d = np.broadcast_to(s, lo.shape), np.broadcast_to(d, lo.shape)
        moving = d != 0
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = np.where(moving, (a - s) / d, -np.inf)
            tb = np.where(moving, (b - s) / d, np.inf)
        outside = ~moving & ((s < a) | (s > b))
        lo = np.maximum(lo, np.minimum(ta, tb))
        hi = np.minimum(hi, np.maximum(ta, tb))
        hi = np.where(outside, -np.inf, hi)
    return lo, hi


@dataclass(frozen=True)
class RaySet:
    sources: np.ndarray  # (M, 2)
    targets: np.ndarray  # (M, 2), detector pixel centres on y = 0
    position: np.ndarray  # 1-based emitter index per ray
    pixel: np.ndarray  # 1-based detector pixel per ray

    @property
    def M(self) -> int:
        return len(self.sources)


def _mirror_x(x, grid: GridSpec):
    return 2 * grid.center_x - x if grid.center_x else -x


def enumerate_rays(geom: ScanGeometry, grid: GridSpec) -> RaySet:
    """Rays crossing the grid, position-major and pixel-minor, left to right.

    The left half of the positions is enumerated and the right half is its
    reflection, so ray ``M - i + 1`` is the mirror of ray ``i`` exactly.
    """
    src = emitter_positions(geom, grid)
    det = detector_centers(geom, grid)
    srcs, tgts, pos, pix = [], [], [], []
    for k in range(geom.K // 2):
        sx, sy = src[k]
        lo, hi = _clip_params(sx, sy, det - sx, -sy, grid)
        hit = np.flatnonzero(hi > lo)
        srcs.append(np.tile(src[k], (hit.size, 1)))
        tgts.append(np.column_stack([det[hit], np.zeros(hit.size)]))
        pos.append(np.full(hit.size, k + 1))
        pix.append(hit + 1)
    if not sum(len(h) for h in pix):
        raise GeometryError("no ray crosses the reconstruction region")
    S, T = np.concatenate(srcs), np.concatenate(tgts)
    P, Q = np.concatenate(pos), np.concatenate(pix)
    Sm = np.column_stack([_mirror_x(S[:, 0], grid), S[:, 1]])[::-1]
    Tm = np.column_stack([_mirror_x(T[:, 0], grid), T[:, 1]])[::-1]
    return RaySet(
        sources=np.concatenate([S, Sm]),
        targets=np.concatenate([T, Tm]),
        position=np.concatenate([P, geom.K + 1 - P[::-1]]),
        pixel=np.concatenate([Q, geom.N_p + 1 - Q[::-1]]),
    )


def _trace(source, target, grid: GridSpec, order: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Siddon traversal; returns 0-based voxel indices and intersection lengths."""
    sx, sy = float(source[0]), float(source[1])
    dx, dy = float(target[0]) - sx, float(target[1]) - sy
    length = math.hypot(dx, dy)
    if length == 0:
        raise GeometryError("degenerate ray: source and target coincide")
    lo, hi = _clip_params(sx, sy, dx, dy, grid)
    lo, hi = float(lo), float(hi)
    if not hi > lo:
        return np.empty(0, dtype=np.int64), np.empty(0)
    xe, ye = grid.x_edges, grid.y_edges
    parts = [np.array([lo, hi])]
    if dx != 0:
        parts.append((xe - sx) / dx)
    if dy != 0:
        parts.append((ye - sy) / dy)
    alpha = np.concatenate(parts)
    alpha = np.unique(alpha[(alpha >= lo) & (alpha <= hi)])
    seg = np.diff(alpha) * length
    mid = 0.5 * (alpha[:-1] + alpha[1:])
    h = grid.voxel_size
    col = np.clip(np.floor((sx + mid * dx - xe[0]) / h).astype(np.int64), 0, grid.n_x - 1)
    row_up = np.clip(np.floor((sy + mid * dy - ye[0]) / h).astype(np.int64), 0, grid.n_y - 1)
    keep = seg > 0
    j = order[grid.n_y - 1 - row_up[keep], col[keep]]
    return j, seg[keep]


def ray_weights(source, target, grid: GridSpec) -> List[Tuple[int, float]]:
    """Intersection length of one ray with every voxel it crosses, as ``(j, length)`` with 1-based ``j``."""
    j, w = _trace(source, target, grid, snake_order(grid))
    return [(int(a) + 1, float(b)) for a, b in zip(j, w)]


def _trace_block(rays: RaySet, idx: np.ndarray, grid: GridSpec, order: np.ndarray):
    cols, vals, counts = [], [], []
    for i in idx:
        j, w = _trace(rays.sources[i], rays.targets[i], grid, order)
        cols.append(j)
        vals.append(w)
        counts.append(j.size)
    return cols, vals, counts


def build_matrix(
    geom: ScanGeometry,
    grid: GridSpec,
    mirror: bool = True,
    workers: int = 1,
) -> Tuple[sp.csr_matrix, RaySet]:
    """Assemble the sparse system matrix.

    With ``mirror`` only rows ``1..M/2`` are traced and row ``M - i + 1`` is
    filled by ``w[M-i+1, N-j+1] = w[i, j]``; otherwise every ray is traced.
    Rows are assembled by index, so the result does not depend on ``workers``.
    """
    rays = enumerate_rays(geom, grid)
    order = snake_order(grid)
    M, N = rays.M, grid.N
    todo = np.arange(M // 2 if mirror else M)
    chunks = np.array_split(todo, max(1, min(workers, todo.size)))
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(lambda c: _trace_block(rays, c, grid, order), chunks))
    else:
        blocks = [_trace_block(rays, c, grid, order) for c in chunks]
    cols = [c for b in blocks for c in b[0]]
    vals = [v for b in blocks for v in b[1]]
    counts = [n for b in blocks for n in b[2]]
    if mirror:
        cols = cols + [N - 1 - c[::-1] for c in cols[::-1]]
        vals = vals + [v[::-1] for v in vals[::-1]]
        counts = counts + counts[::-1]
    indptr = np.concatenate([[0], np.cumsum(counts)])
    A = sp.csr_matrix(
        (np.concatenate(vals), np.concatenate(cols), indptr), shape=(M, N)
    )
    A.sort_indices()
    return A, rays


def build_system(
    geom: ScanGeometry,
    grid: GridSpec,
    p=None,
    mirror: bool = True,
    workers: int = 1,
) -> CentroSymmetricSystem:
    """System matrix for the scan; ``p`` defaults to zeros until data are attached."""
    A, rays = build_matrix(geom, grid, mirror=mirror, workers=workers)
    p = np.zeros(A.shape[0]) if p is None else p
    meta = {
        "M": A.shape[0],
        "N": A.shape[1],
        "nnz": int(A.nnz),
        "fill_ratio": fill_ratio(A),
        "geometry": asdict(geom),
        "grid": asdict(grid),
        "rays": rays,
    }
    return CentroSymmetricSystem(A, p, symmetry_tol=0.0, meta=meta)


def polar_symmetric_numbering(n_rings: int, n_sectors: int) -> np.ndarray:
    """Renumber polar cells so that cells ``j`` and ``N - j + 1`` are mirror images.

    Conventional numbering is ring-major, ``k = (ring - 1) * n_sectors + s``,
    with sectors counted counter-clockwise starting at the symmetry axis, so
    sector ``s`` mirrors onto sector ``n_sectors - s + 1``.  Returns
    ``perm`` with ``perm[k - 1]`` the new 1-based index of cell ``k``.
    """
    if n_rings < 1 or n_sectors < 2 or n_sectors % 2:
        raise ValueError(f"n_sectors must be even and n_rings positive, got {n_rings}, {n_sectors}")
    N = n_rings * n_sectors
    ring = np.repeat(np.arange(1, n_rings + 1), n_sectors)
    sector = np.tile(np.arange(1, n_sectors + 1), n_rings)
    left = sector <= n_sectors // 2
    mirror_sector = np.where(left, sector, n_sectors - sector + 1)
    base = (mirror_sector - 1) * n_rings + ring
    return np.where(left, base, N + 1 - base)


def polar_mirror(k: int, n_rings: int, n_sectors: int) -> int:
    """Conventional index of the mirror image of conventional cell ``k``."""
    ring, s = divmod(k - 1, n_sectors)
    return ring * n_sectors + (n_sectors - (s + 1) + 1)


def _check_perm(perm, n: int, name: str) -> np.ndarray:
    if perm is None:
        return np.arange(n)
    perm = np.asarray(perm)
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(1, n + 1)):
        raise ValueError(f"{name} is not a permutation of 1..{n}")
    return perm - 1


def apply_permutation(sys: CentroSymmetricSystem, row_perm=None, col_perm=None) -> CentroSymmetricSystem:
    """Renumber rows and columns; ``perm[old - 1]`` is the new 1-based index."""
    M, N = sys.A.shape
    rp = _check_perm(row_perm, M, "row_perm")
    cp = _check_perm(col_perm, N, "col_perm")
    rinv = np.empty(M, dtype=np.int64)
    rinv[rp] = np.arange(M)
    cinv = np.empty(N, dtype=np.int64)
    cinv[cp] = np.arange(N)
    if sp.issparse(sys.A):
        A = sp.csr_matrix(sys.A)[rinv][:, cinv]
    else:
        A = np.asarray(sys.A)[np.ix_(rinv, cinv)]
    return CentroSymmetricSystem(A, np.asarray(sys.p)[rinv], sys.symmetry_tol, dict(sys.meta))


CONFIG_KEYS = {
    "k": int,
    "gamma_deg": float,
    "h_e": float,
    "h_m": float,
    "l_m": float,
    "n_p": int,
    "grid_nx": int,
    "grid_ny": int,
    "obj_size": float,
}


def parse_config(text: str) -> Tuple[ScanGeometry, GridSpec]:
    """Parse ``key = value`` lines (``#`` starts a comment).  Angles in degrees."""
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.replace(":", "=", 1).partition("=")
        key = key.strip().lower()
        if not sep or key not in CONFIG_KEYS:
            raise GeometryError(f"line {lineno}: unrecognised entry {raw.strip()!r}")
        try:
            cfg[key] = CONFIG_KEYS[key](value.strip())
        except ValueError:
            raise GeometryError(f"line {lineno}: bad value for {key}: {value.strip()!r}") from None
    geom = ScanGeometry(
        K=cfg.get("k", 24),
        gamma=math.radians(cfg.get("gamma_deg", 30.0)),
        h_e=cfg.get("h_e", 1.0),
        h_m=cfg.get("h_m", 0.25),
        L_m=cfg.get("l_m", 0.43),
        N_p=cfg.get("n_p", 1024),
    )
    nx = cfg.get("grid_nx", 32)
    ny = cfg.get("grid_ny", nx)
    size = cfg.get("obj_size", nx * DEFAULT_VOXEL_SIZE)
    grid = GridSpec(n_x=nx, n_y=ny, voxel_size=size / nx, y_bottom=geom.h_m)
    return geom, grid


def load_config(path) -> Tuple[ScanGeometry, GridSpec]:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def benchmark_case(n: int) -> Tuple[ScanGeometry, GridSpec]:
    """Benchmark case on an n x n grid: K = 24 * n / 32 positions, 1 mm voxels."""
    if n % 32:
        raise GeometryError("benchmark sizes are multiples of 32")
    geom = ScanGeometry(K=24 * n // 32)
    return geom, GridSpec(n_x=n, n_y=n, y_bottom=geom.h_m)
