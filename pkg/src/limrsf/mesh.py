"""Triangle mesh container and small topology helpers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ValidationError


@dataclass
class TriangleMesh:
    """Indexed triangle mesh with optional per-vertex attributes.

    Attributes:
        vertices: (V, 3) float64 positions, finite.
        triangles: (T, 3) int64 vertex indices; no index repeats within a
            triangle and every index is < V.
        vertex_colors: optional (V, 4) float64 RGBA, channels in [0, 1].
        vertex_density: optional (V,) float64, nonnegative support counts.
        highlight: optional (V,) bool blind-spot flags.

    Instances are treated as immutable; transformations return new meshes.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    vertex_colors: Optional[np.ndarray] = None
    vertex_density: Optional[np.ndarray] = None
    highlight: Optional[np.ndarray] = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValidationError(f"vertices must have shape (V, 3), got {self.vertices.shape}")
        if self.vertices.size and not np.isfinite(self.vertices).all():
            raise ValidationError("vertices contain non-finite values")
        v = self.vertices.shape[0]

        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.triangles.size:
            if self.triangles.min() < 0 or self.triangles.max() >= v:
                raise ValidationError(
                    f"triangle indices must lie in [0, {v}), got "
                    f"[{self.triangles.min()}, {self.triangles.max()}]"
                )
            t = self.triangles
            if ((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])).any():
                raise ValidationError("degenerate triangle: repeated vertex index")

        if self.vertex_colors is not None:
            self.vertex_colors = np.asarray(self.vertex_colors, dtype=np.float64)
            if self.vertex_colors.shape != (v, 4):
                raise ValidationError(
                    f"vertex_colors must have shape ({v}, 4), got {self.vertex_colors.shape}"
                )
            if self.vertex_colors.size and (
                self.vertex_colors.min() < 0.0 or self.vertex_colors.max() > 1.0
            ):
                raise ValidationError("vertex_colors must lie in [0, 1]")
        if self.vertex_density is not None:
            self.vertex_density = np.asarray(self.vertex_density, dtype=np.float64).reshape(-1)
            if self.vertex_density.shape != (v,):
                raise ValidationError(
                    f"vertex_density must have length {v}, got {self.vertex_density.shape[0]}"
                )
            if self.vertex_density.size and self.vertex_density.min() < 0.0:
                raise ValidationError("vertex_density must be nonnegative")
        if self.highlight is not None:
            self.highlight = np.asarray(self.highlight, dtype=bool).reshape(-1)
            if self.highlight.shape != (v,):
                raise ValidationError(
                    f"highlight must have length {v}, got {self.highlight.shape[0]}"
                )

    @property
    def vertex_count(self) -> int:
        return self.vertices.shape[0]

    @property
    def triangle_count(self) -> int:
        return self.triangles.shape[0]

    def edges(self) -> np.ndarray:
        """Unique undirected edges as an (E, 2) array with row[0] < row[1]."""
        if self.triangles.size == 0:
            return np.zeros((0, 2), dtype=np.int64)
        t = self.triangles
        pairs = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [0, 2]]])
        pairs = np.sort(pairs, axis=1)
        return np.unique(pairs, axis=0)

    def edge_triangle_counts(self) -> np.ndarray:
        """How many triangles share each edge, aligned with :meth:`edges`."""
        if self.triangles.size == 0:
            return np.zeros(0, dtype=np.int64)
        t = self.triangles
        pairs = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [0, 2]]])
        pairs = np.sort(pairs, axis=1)
        _, counts = np.unique(pairs, axis=0, return_counts=True)
        return counts

    def euler_characteristic(self) -> int:
        return self.vertex_count - self.edges().shape[0] + self.triangle_count

    def is_closed(self) -> bool:
        """True when every edge is shared by exactly two triangles."""
        counts = self.edge_triangle_counts()
        return bool(counts.size) and bool((counts == 2).all())
