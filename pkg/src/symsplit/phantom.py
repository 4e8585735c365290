"""Shepp-Logan phantom on a snake-numbered voxel grid, and forward projection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np

from .core import Matrix
from .geometry import GridSpec, ensnake


@dataclass(frozen=True)
class Ellipse:
    center: Tuple[float, float]  # normalized [-1, 1]^2, y up
    axes: Tuple[float, float]
    angle_deg: float
    density: float

    def __post_init__(self):
        if not (self.axes[0] > 0 and self.axes[1] > 0):
            raise ValueError(f"semi-axes must be positive, got {self.axes}")

    def mirrored(self) -> "Ellipse":
        return Ellipse((-self.center[0], self.center[1]), self.axes, -self.angle_deg, self.density)


# Modified (higher-contrast) Shepp-Logan table:
# density, a, b, x0, y0, angle in degrees
_SHEPP_LOGAN = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)


def shepp_logan_ellipses() -> List[Ellipse]:
    return [Ellipse((x, y), (a, b), phi, rho) for rho, a, b, x, y, phi in _SHEPP_LOGAN]


def symmetric_shepp_logan() -> List[Ellipse]:
    """Exactly left-right symmetric variant.

    The left ventricle is replaced by the mirror image of the right one and
    the two off-axis ellipses near the bottom are dropped.
    """
    es = shepp_logan_ellipses()
    return es[:3] + [es[2].mirrored()] + es[4:7] + [es[8]]


@dataclass(frozen=True)
class PhantomImage:
    grid: GridSpec
    values: np.ndarray  # snake order, length N

    def __post_init__(self):
        if self.values.shape != (self.grid.N,):
            raise ValueError(f"expected {self.grid.N} values, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("phantom values must be finite")

    @property
    def value_range(self) -> Tuple[float, float]:
        return float(self.values.min()), float(self.values.max())


def voxel_centers(grid: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Normalized centre coordinates as ``(n_y, n_x)`` arrays, top row first."""
    u = (np.arange(grid.n_x) - (grid.n_x - 1) / 2) / (grid.n_x / 2)
    v = ((grid.n_y - 1) / 2 - np.arange(grid.n_y)) / (grid.n_y / 2)
    # exact mirror symmetry in x
    u = np.concatenate([-u[::-1][: grid.n_x // 2], u[grid.n_x // 2 :]])
    return np.meshgrid(u, v)


def rasterize_image(ellipses: Iterable[Ellipse], grid: GridSpec) -> np.ndarray:
    """Row-major ``(n_y, n_x)`` image; each voxel sums densities of ellipses containing its centre."""
    X, Y = voxel_centers(grid)
    img = np.zeros((grid.n_y, grid.n_x))
    for e in ellipses:
        phi = math.radians(e.angle_deg)
        c, s = math.cos(phi), math.sin(phi)
        x, y = X - e.center[0], Y - e.center[1]
        inside = ((x * c + y * s) / e.axes[0]) ** 2 + ((y * c - x * s) / e.axes[1]) ** 2 <= 1
        img[inside] += e.density
    return img


def rasterize(ellipses: Iterable[Ellipse], grid: GridSpec) -> PhantomImage:
    return PhantomImage(grid, ensnake(rasterize_image(ellipses, grid), grid))


def forward_project(
    A: Matrix,
    f_true,
    noise_sigma: Optional[float] = None,
    seed: int = 0,
) -> np.ndarray:
    """``p = A f_true``, optionally plus seeded iid Gaussian noise."""
    f_true = np.asarray(getattr(f_true, "values", f_true), dtype=np.float64)
    if f_true.shape != (A.shape[1],):
        raise ValueError(f"image has {f_true.size} voxels, matrix has {A.shape[1]} columns")
    p = np.asarray(A @ f_true, dtype=np.float64).ravel()
    if noise_sigma:
        p = p + np.random.default_rng(seed).normal(0.0, noise_sigma, p.shape)
    return p
