"""Per-vertex densities, blind-spot highlighting, and cloud-to-mesh color transfer."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import ValidationError
from .geometry import PointCloud, SpatialIndex
from .mesh import TriangleMesh

HIGHLIGHT_RGB = (1.0, 0.0, 0.0)


@dataclass
class HighlightParams:
    """Blind-spot highlighting parameters.

    ``density_threshold`` is the fraction of the mean vertex density below
    which a vertex counts as a blind spot; values in (0, 1) are the useful
    range, but any positive value is accepted (>= 1 simply highlights
    everything strictly below the mean). Highlighted vertices are painted
    red with ``highlight_alpha``; all others keep their color with
    ``base_alpha``.
    """

    density_threshold: float = 0.3
    base_alpha: float = 0.5
    highlight_alpha: float = 0.35

    def __post_init__(self):
        self.density_threshold = float(self.density_threshold)
        if not (self.density_threshold > 0.0 and math.isfinite(self.density_threshold)):
            raise ValidationError(
                f"density_threshold must be positive, got {self.density_threshold!r}"
            )
        for name in ("base_alpha", "highlight_alpha"):
            value = float(getattr(self, name))
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {value!r}")
            setattr(self, name, value)


@dataclass
class HighlightStats:
    """Mean vertex density and the derived highlight cut, exactly as computed."""

    mean_density: float
    threshold: float


def compute_vertex_densities(
    mesh: TriangleMesh, cloud: PointCloud, density_radius: float
) -> TriangleMesh:
    """Set each vertex density to the number of cloud points within the radius.

    The count uses a closed ball, so a vertex coincident with a cloud point
    always scores at least 1.
    """
    if mesh.vertex_count == 0:
        raise ValidationError("mesh has no vertices")
    if len(cloud) == 0:
        raise ValidationError("cloud has no points")
    counts = SpatialIndex(cloud.points).count_within(mesh.vertices, density_radius)
    return replace(mesh, vertex_density=counts.astype(np.float64))


def highlight_stats(mesh: TriangleMesh, params: HighlightParams) -> HighlightStats:
    """The mean density and cut used by :func:`highlight_blind_spots`."""
    if mesh.vertex_density is None:
        raise ValidationError("vertex densities missing; run compute_vertex_densities first")
    mean_density = float(mesh.vertex_density.mean())
    return HighlightStats(
        mean_density=mean_density, threshold=mean_density * params.density_threshold
    )


def highlight_blind_spots(mesh: TriangleMesh, params: HighlightParams) -> TriangleMesh:
    """Flag and recolor vertices whose density falls strictly below the cut.

    The cut is mean_density * density_threshold. Highlighted vertices become
    red with ``highlight_alpha``; the rest keep their RGB (white if the mesh
    had no colors) with ``base_alpha``.
    """
    stats = highlight_stats(mesh, params)
    flagged = mesh.vertex_density < stats.threshold

    if mesh.vertex_colors is not None:
        rgb = mesh.vertex_colors[:, :3].copy()
    else:
        rgb = np.ones((mesh.vertex_count, 3), dtype=np.float64)
    rgb[flagged] = HIGHLIGHT_RGB
    alpha = np.where(flagged, params.highlight_alpha, params.base_alpha)
    colors = np.concatenate([rgb, alpha[:, None]], axis=1)
    return replace(mesh, vertex_colors=colors, highlight=flagged)


def transfer_colors(mesh: TriangleMesh, cloud: PointCloud, k: int = 3) -> TriangleMesh:
    """Color each vertex from its k nearest cloud points.

    Weights are 1/(distance + 1e-9), normalized, so a vertex coincident with
    a cloud point effectively copies that point's color. Alpha is left
    untouched (1.0 when the mesh had no colors yet).
    """
    if cloud.colors is None:
        raise ValidationError("cloud has no colors to transfer")
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValidationError(f"k must be a positive integer, got {k!r}")
    if mesh.vertex_count == 0:
        raise ValidationError("mesh has no vertices")
    k = min(int(k), len(cloud))

    tree = cKDTree(cloud.points)
    _, idx = tree.query(mesh.vertices, k=k)
    idx = idx.reshape(mesh.vertex_count, k)
    diff = cloud.points[idx] - mesh.vertices[:, None, :]
    dist = np.sqrt(np.sum(diff**2, axis=2))
    weights = 1.0 / (dist + 1e-9)
    weights /= weights.sum(axis=1, keepdims=True)
    rgb = np.einsum("vk,vkc->vc", weights, cloud.colors[idx])
    rgb = np.clip(rgb, 0.0, 1.0)

    if mesh.vertex_colors is not None:
        alpha = mesh.vertex_colors[:, 3:4]
    else:
        alpha = np.ones((mesh.vertex_count, 1), dtype=np.float64)
    return replace(mesh, vertex_colors=np.concatenate([rgb, alpha], axis=1))
