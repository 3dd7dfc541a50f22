"""Poisson surface reconstruction on a uniform grid.

The oriented cloud is splatted into a vector field N on a regular
2**depth-per-axis grid, the divergence rho = div(N) is formed by central
differences, the indicator chi is recovered from the Neumann Poisson problem
laplace(chi) = rho with a matrix-free conjugate-gradient solve, and the
surface is the marching-cubes isosurface of chi at the mean indicator value
sampled at the input points (plus a configurable offset).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage.measure import marching_cubes

from .errors import ReconstructionError, SolverError, ValidationError
from .geometry import PointCloud
from .mesh import TriangleMesh

_CG_TOL = 1e-6
_CG_MAXITER = 20000


@dataclass
class ReconstructionParams:
    """Grid resolution and kernel widths for reconstruction.

    ``depth`` gives 2**depth grid nodes per axis (anisotropic spacing fits
    the cloud's bounding box). ``smoothing_radius`` is the Gaussian splat
    width in grid cells. ``density_radius`` is the support-count ball used
    later for per-vertex densities. ``iso_offset`` shifts the isosurface
    level away from the sampled mean.
    """

    depth: int = 6
    smoothing_radius: float = 2.0
    density_radius: float = 0.15
    iso_offset: float = 0.0

    def __post_init__(self):
        if not isinstance(self.depth, (int, np.integer)) or not 3 <= int(self.depth) <= 9:
            raise ValidationError(f"depth must be an integer in [3, 9], got {self.depth!r}")
        self.depth = int(self.depth)
        self.smoothing_radius = float(self.smoothing_radius)
        if not (self.smoothing_radius > 0.0 and math.isfinite(self.smoothing_radius)):
            raise ValidationError(f"smoothing_radius must be positive, got {self.smoothing_radius!r}")
        self.density_radius = float(self.density_radius)
        if not (self.density_radius > 0.0 and math.isfinite(self.density_radius)):
            raise ValidationError(f"density_radius must be positive, got {self.density_radius!r}")
        self.iso_offset = float(self.iso_offset)
        if not math.isfinite(self.iso_offset):
            raise ValidationError(f"iso_offset must be finite, got {self.iso_offset!r}")


@dataclass
class VectorGrid:
    """Axis-aligned grid of 3-vectors (the splatted normal field)."""

    origin: np.ndarray  # (3,) world position of node (0, 0, 0)
    spacing: np.ndarray  # (3,) cell size per axis
    values: np.ndarray  # (R, R, R, 3)


@dataclass
class ScalarGrid:
    """Axis-aligned grid of scalars (divergence or indicator)."""

    origin: np.ndarray
    spacing: np.ndarray
    values: np.ndarray  # (R, R, R)


def _grid_layout(points: np.ndarray, depth: int, smoothing_radius: float):
    resolution = 2**depth
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    extent = hi - lo
    if (extent <= 0.0).any():
        raise ReconstructionError(
            f"degenerate bounding box {extent.tolist()}; the cloud must span all three axes"
        )
    pad = math.ceil(3.0 * smoothing_radius) + 2
    pad = min(pad, (resolution - 4) // 2)
    interior = resolution - 2 * pad
    spacing = extent / interior
    origin = lo - pad * spacing
    return resolution, origin, spacing


def splat_normals(points: np.ndarray, normals: np.ndarray, params: ReconstructionParams) -> VectorGrid:
    """Trilinearly deposit each oriented normal, then blur with a Gaussian."""
    resolution, origin, spacing = _grid_layout(points, params.depth, params.smoothing_radius)
    g = (points - origin) / spacing
    base = np.clip(np.floor(g).astype(np.int64), 0, resolution - 2)
    frac = g - base

    field = np.zeros((resolution, resolution, resolution, 3), dtype=np.float64)
    flat = field.reshape(-1, 3)
    for cx in (0, 1):
        wx = frac[:, 0] if cx else 1.0 - frac[:, 0]
        for cy in (0, 1):
            wy = frac[:, 1] if cy else 1.0 - frac[:, 1]
            for cz in (0, 1):
                wz = frac[:, 2] if cz else 1.0 - frac[:, 2]
                w = wx * wy * wz
                cell = (
                    (base[:, 0] + cx) * resolution + (base[:, 1] + cy)
                ) * resolution + (base[:, 2] + cz)
                for comp in range(3):
                    flat[:, comp] += np.bincount(
                        cell, weights=w * normals[:, comp], minlength=flat.shape[0]
                    )

    for comp in range(3):
        field[..., comp] = ndimage.gaussian_filter(
            field[..., comp], sigma=params.smoothing_radius, mode="constant", cval=0.0
        )
    return VectorGrid(origin=origin, spacing=spacing, values=field)


def divergence(grid: VectorGrid) -> ScalarGrid:
    """div(N) by central differences (one-sided at the boundary)."""
    v = grid.values
    h = grid.spacing
    rho = (
        np.gradient(v[..., 0], h[0], axis=0)
        + np.gradient(v[..., 1], h[1], axis=1)
        + np.gradient(v[..., 2], h[2], axis=2)
    )
    return ScalarGrid(origin=grid.origin, spacing=grid.spacing, values=rho)


def apply_laplacian(u: np.ndarray, spacing: np.ndarray) -> np.ndarray:
    """7-point Laplacian with zero-flux (Neumann) boundaries via edge replication."""
    p = np.pad(u, 1, mode="edge")
    inv = 1.0 / (np.asarray(spacing, dtype=np.float64) ** 2)
    return (
        (p[2:, 1:-1, 1:-1] - 2.0 * u + p[:-2, 1:-1, 1:-1]) * inv[0]
        + (p[1:-1, 2:, 1:-1] - 2.0 * u + p[1:-1, :-2, 1:-1]) * inv[1]
        + (p[1:-1, 1:-1, 2:] - 2.0 * u + p[1:-1, 1:-1, :-2]) * inv[2]
    )


def solve_poisson(
    rho: ScalarGrid, tol: float = _CG_TOL, maxiter: int = _CG_MAXITER
) -> ScalarGrid:
    """Solve laplace(chi) = rho with Neumann boundaries.

    The Neumann problem only fixes chi up to a constant and only admits
    solutions for mean-free right-hand sides, so the rhs is projected onto
    mean zero and the returned field is mean-free. Convergence is a relative
    residual <= tol; failure raises with the final residual.
    """
    spacing = rho.spacing
    b = -(rho.values - rho.values.mean())
    bnorm = math.sqrt(float(np.vdot(b, b)))
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return ScalarGrid(origin=rho.origin, spacing=spacing, values=x)

    r = b.copy()
    p = r.copy()
    rs = float(np.vdot(r, r))
    for iteration in range(1, maxiter + 1):
        ap = -apply_laplacian(p, spacing)
        denom = float(np.vdot(p, ap))
        if denom <= 0.0:
            raise SolverError(
                "conjugate gradient broke down on a non-positive curvature direction",
                residual=math.sqrt(rs) / bnorm,
                iterations=iteration,
            )
        alpha = rs / denom
        x += alpha * p
        r -= alpha * ap
        r -= r.mean()  # keep the iterate orthogonal to the constant kernel
        rs_next = float(np.vdot(r, r))
        if math.sqrt(rs_next) <= tol * bnorm:
            x -= x.mean()
            return ScalarGrid(origin=rho.origin, spacing=spacing, values=x)
        p = r + (rs_next / rs) * p
        rs = rs_next
    raise SolverError(
        "Poisson solve did not converge",
        residual=math.sqrt(rs) / bnorm,
        iterations=maxiter,
    )


def _sample_trilinear(values: np.ndarray, origin, spacing, points: np.ndarray) -> np.ndarray:
    coords = ((points - origin) / spacing).T
    return ndimage.map_coordinates(values, coords, order=1, mode="nearest")


def poisson_reconstruct(cloud: PointCloud, params: ReconstructionParams) -> TriangleMesh:
    """Reconstruct a triangle mesh from an oriented point cloud.

    Points whose normal is the zero vector (degenerate neighborhoods) are
    ignored; at least 4 usable normals are required. The returned mesh has
    globally consistent winding chosen so that face normals agree with the
    splatted field on average, and carries no colors or densities yet.
    """
    if cloud.normals is None:
        raise ReconstructionError("reconstruction requires an oriented cloud (normals missing)")
    usable = np.sqrt(np.sum(cloud.normals**2, axis=1)) > 0.5
    if int(usable.sum()) < 4:
        raise ReconstructionError(
            f"reconstruction needs at least 4 points with usable normals, got {int(usable.sum())}"
        )
    points = cloud.points[usable]
    normals = cloud.normals[usable]

    field = splat_normals(points, normals, params)
    rho = divergence(field)
    chi = solve_poisson(rho)

    sampled = _sample_trilinear(chi.values, chi.origin, chi.spacing, points)
    level = float(sampled.mean()) + params.iso_offset
    lo, hi = float(chi.values.min()), float(chi.values.max())
    if not lo < level < hi:
        raise ReconstructionError(
            f"isosurface level {level:.6g} lies outside the solved field range [{lo:.6g}, {hi:.6g}]"
        )

    verts, faces, _, _ = marching_cubes(
        chi.values, level=level, spacing=tuple(float(s) for s in chi.spacing)
    )
    verts = verts.astype(np.float64) + chi.origin
    faces = faces.astype(np.int64)

    # Orient the winding with the splatted field: compare face normals with
    # the field at triangle centroids and flip everything if the majority
    # disagrees. Marching cubes already gives a globally consistent
    # orientation; this only picks its sign.
    centroids = verts[faces].mean(axis=1)
    e1 = verts[faces[:, 1]] - verts[faces[:, 0]]
    e2 = verts[faces[:, 2]] - verts[faces[:, 0]]
    face_normals = np.cross(e1, e2)
    field_at = np.stack(
        [
            _sample_trilinear(field.values[..., c], field.origin, field.spacing, centroids)
            for c in range(3)
        ],
        axis=1,
    )
    if float(np.sum(face_normals * field_at)) < 0.0:
        faces = faces[:, ::-1].copy()

    return TriangleMesh(vertices=verts, triangles=faces)
