import numpy as np
import pytest

from limrsf.geometry import PointCloud
from limrsf.mesh import TriangleMesh


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_tetrahedron(**extras) -> TriangleMesh:
    vertices = np.array(
        [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    )
    triangles = np.array([[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]], dtype=np.int64)
    return TriangleMesh(vertices=vertices, triangles=triangles, **extras)


def with_attributes(mesh: TriangleMesh, highlight_mask=None) -> TriangleMesh:
    """Attach colors, densities, and highlight flags so save_mesh accepts it."""
    v = mesh.vertex_count
    colors = np.full((v, 4), 0.5)
    colors[:, 3] = 1.0
    highlight = np.zeros(v, dtype=bool)
    if highlight_mask is not None:
        highlight[highlight_mask] = True
    return TriangleMesh(
        vertices=mesh.vertices,
        triangles=mesh.triangles,
        vertex_colors=colors,
        vertex_density=np.full(v, 8.0),
        highlight=highlight,
    )


def random_cloud(rng, n: int, with_colors=False, with_normals=False) -> PointCloud:
    points = rng.uniform(-1.0, 1.0, size=(n, 3))
    colors = None
    normals = None
    if with_colors:
        colors = rng.integers(0, 256, size=(n, 3)).astype(np.float64) / 255.0
    if with_normals:
        normals = rng.normal(size=(n, 3))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return PointCloud(points=points, colors=colors, normals=normals)
