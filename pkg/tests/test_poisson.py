import numpy as np
import pytest

import oracles
from limrsf.errors import ReconstructionError, SolverError, ValidationError
from limrsf.geometry import PointCloud
from limrsf.poisson import (
    ReconstructionParams,
    ScalarGrid,
    VectorGrid,
    apply_laplacian,
    divergence,
    poisson_reconstruct,
    solve_poisson,
    splat_normals,
)


def oriented_sphere(n: int, radius: float = 1.0) -> PointCloud:
    pts = oracles.fibonacci_sphere(n, radius)
    return PointCloud(points=pts, normals=pts / radius)


class TestParams:
    def test_depth_bounds(self):
        with pytest.raises(ValidationError):
            ReconstructionParams(depth=2)
        with pytest.raises(ValidationError):
            ReconstructionParams(depth=10)
        with pytest.raises(ValidationError):
            ReconstructionParams(depth=6.0)

    def test_positive_radii(self):
        with pytest.raises(ValidationError):
            ReconstructionParams(smoothing_radius=0.0)
        with pytest.raises(ValidationError):
            ReconstructionParams(density_radius=-1.0)
        with pytest.raises(ValidationError):
            ReconstructionParams(iso_offset=np.inf)


class TestSplat:
    def test_mass_conservation(self, rng):
        cloud = oriented_sphere(300)
        # at this width the blur kernel fits strictly inside the padding,
        # so no mass is lost at the grid boundary
        params = ReconstructionParams(depth=5, smoothing_radius=0.5)
        grid = splat_normals(cloud.points, cloud.normals, params)
        for c in range(3):
            assert np.isclose(
                grid.values[..., c].sum(), cloud.normals[:, c].sum(), atol=1e-9
            )

    def test_grid_covers_cloud(self):
        cloud = oriented_sphere(100)
        params = ReconstructionParams(depth=5)
        grid = splat_normals(cloud.points, cloud.normals, params)
        res = grid.values.shape[0]
        assert grid.values.shape == (res, res, res, 3)
        top = grid.origin + (res - 1) * grid.spacing
        assert np.all(cloud.points.min(axis=0) >= grid.origin)
        assert np.all(cloud.points.max(axis=0) <= top)


class TestOperators:
    def test_divergence_of_linear_field(self):
        r = 12
        spacing = np.array([0.5, 0.25, 1.0])
        x = np.arange(r) * spacing[0]
        values = np.zeros((r, r, r, 3))
        values[..., 0] = x[:, None, None]
        rho = divergence(VectorGrid(origin=np.zeros(3), spacing=spacing, values=values))
        assert np.allclose(rho.values, 1.0, atol=1e-12)

    def test_divergence_of_rotational_field_is_zero(self):
        r = 10
        spacing = np.ones(3)
        z = np.arange(r, dtype=np.float64)
        values = np.zeros((r, r, r, 3))
        values[..., 1] = z[None, None, :]  # v = (0, z, 0): div = 0
        rho = divergence(VectorGrid(origin=np.zeros(3), spacing=spacing, values=values))
        assert np.allclose(rho.values, 0.0, atol=1e-12)

    def test_laplacian_of_constant_is_zero(self):
        u = np.full((8, 8, 8), 3.5)
        assert np.array_equal(apply_laplacian(u, np.array([0.5, 1.0, 2.0])), np.zeros_like(u))

    def test_laplacian_of_quadratic_interior(self):
        r = 10
        s = 0.5
        x = np.arange(r) * s
        u = np.broadcast_to((x**2)[:, None, None], (r, r, r)).copy()
        lap = apply_laplacian(u, np.array([s, s, s]))
        assert np.allclose(lap[1:-1, :, :], 2.0, atol=1e-9)


class TestSolver:
    def test_zero_rhs_returns_zero(self):
        rho = ScalarGrid(origin=np.zeros(3), spacing=np.ones(3), values=np.zeros((8, 8, 8)))
        chi = solve_poisson(rho)
        assert np.array_equal(chi.values, np.zeros((8, 8, 8)))

    def test_recovers_manufactured_solution(self):
        r = 20
        spacing = np.array([0.7, 0.5, 0.9])
        i, j, k = np.meshgrid(np.arange(r), np.arange(r), np.arange(r), indexing="ij")
        # zero discrete normal derivative at the faces keeps the problem
        # compatible with the replicated-edge Laplacian
        chi0 = (
            np.cos(np.pi * i / (r - 1))
            + 0.5 * np.cos(np.pi * j / (r - 1))
            + 0.25 * np.cos(2.0 * np.pi * k / (r - 1))
        )
        rho_vals = apply_laplacian(chi0, spacing)
        chi = solve_poisson(ScalarGrid(origin=np.zeros(3), spacing=spacing, values=rho_vals))
        assert abs(chi.values.mean()) < 1e-9
        assert np.allclose(chi.values, chi0 - chi0.mean(), atol=5e-4)

    def test_solution_satisfies_equation(self):
        rng = np.random.default_rng(7)
        rho_vals = rng.normal(size=(12, 12, 12))
        rho = ScalarGrid(origin=np.zeros(3), spacing=np.full(3, 0.5), values=rho_vals)
        chi = solve_poisson(rho)
        b = rho_vals - rho_vals.mean()
        residual = apply_laplacian(chi.values, rho.spacing) - b
        assert np.linalg.norm(residual) <= 1e-5 * np.linalg.norm(b)

    def test_nonconvergence_raises(self):
        rng = np.random.default_rng(3)
        rho = ScalarGrid(
            origin=np.zeros(3), spacing=np.ones(3), values=rng.normal(size=(10, 10, 10))
        )
        with pytest.raises(SolverError) as e:
            solve_poisson(rho, maxiter=1)
        assert e.value.iterations == 1
        assert e.value.residual > 0.0


class TestReconstruct:
    def test_sphere_is_closed_and_round(self):
        cloud = oriented_sphere(1200)
        mesh = poisson_reconstruct(cloud, ReconstructionParams(depth=5))
        assert mesh.is_closed()
        assert mesh.euler_characteristic() == 2
        radii = np.linalg.norm(mesh.vertices, axis=1)
        rms = float(np.sqrt(np.mean((radii - 1.0) ** 2)))
        assert rms < 0.05

    def test_winding_faces_outward(self):
        cloud = oriented_sphere(1200)
        mesh = poisson_reconstruct(cloud, ReconstructionParams(depth=5))
        tri = mesh.vertices[mesh.triangles]
        face_normals = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        centroids = tri.mean(axis=1)
        outward = np.einsum("ij,ij->i", face_normals, centroids)
        assert np.mean(outward > 0.0) > 0.99

    def test_deterministic(self):
        cloud = oriented_sphere(500)
        params = ReconstructionParams(depth=4)
        a = poisson_reconstruct(cloud, params)
        b = poisson_reconstruct(cloud, params)
        assert a.vertices.tobytes() == b.vertices.tobytes()
        assert a.triangles.tobytes() == b.triangles.tobytes()

    def test_requires_normals(self):
        with pytest.raises(ReconstructionError):
            poisson_reconstruct(
                PointCloud(points=oracles.fibonacci_sphere(50)), ReconstructionParams()
            )

    def test_requires_enough_usable_normals(self):
        pts = oracles.fibonacci_sphere(50)
        normals = np.zeros((50, 3))
        normals[0] = (0.0, 0.0, 1.0)  # only one usable normal
        with pytest.raises(ReconstructionError):
            poisson_reconstruct(
                PointCloud(points=pts, normals=normals), ReconstructionParams()
            )

    def test_rejects_planar_cloud(self):
        xs, ys = np.meshgrid(np.linspace(0, 1, 10), np.linspace(0, 1, 10))
        pts = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(xs.size)])
        normals = np.tile([0.0, 0.0, 1.0], (pts.shape[0], 1))
        with pytest.raises(ReconstructionError):
            poisson_reconstruct(
                PointCloud(points=pts, normals=normals), ReconstructionParams()
            )
