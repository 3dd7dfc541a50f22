"""Independent brute-force reference implementations used to pin expected values.

Everything here trades speed for obviousness: per-pair scalar loops, no
spatial indexing, no shared code with the package under test beyond numpy.
"""

from __future__ import annotations

import numpy as np


def brute_knn(points: np.ndarray, query: np.ndarray, k: int) -> list[tuple[int, float]]:
    """k nearest by exhaustive scan; ties broken by the lower index."""
    dists = []
    for i in range(points.shape[0]):
        diff = points[i] - query
        dists.append((float(np.sqrt(np.sum(diff**2))), i))
    dists.sort()
    return [(i, d) for d, i in dists[:k]]


def brute_radius(points: np.ndarray, query: np.ndarray, r: float) -> np.ndarray:
    """All indices with distance <= r, ascending by index."""
    hits = []
    for i in range(points.shape[0]):
        diff = points[i] - query
        if float(np.sqrt(np.sum(diff**2))) <= r:
            hits.append(i)
    return np.array(hits, dtype=np.int64)


def brute_count_within(points: np.ndarray, queries: np.ndarray, r: float) -> np.ndarray:
    return np.array(
        [brute_radius(points, q, r).size for q in queries], dtype=np.int64
    )


def brute_mapped_indices(points: np.ndarray, seeds: np.ndarray, r: float) -> np.ndarray:
    """Unique indices of points within r of at least one seed, sorted."""
    hit = set()
    for s in seeds:
        hit.update(brute_radius(points, s, r).tolist())
    return np.array(sorted(hit), dtype=np.int64)


def brute_outlier_mean_distances(points: np.ndarray, k: int) -> np.ndarray:
    """Mean distance to the k nearest neighbors, self excluded once."""
    n = points.shape[0]
    out = np.empty(n)
    for i in range(n):
        dists = sorted(
            float(np.sqrt(np.sum((points[j] - points[i]) ** 2)))
            for j in range(n)
            if j != i
        )
        out[i] = float(np.mean(dists[:k]))
    return out


def fibonacci_sphere(n: int, radius: float = 1.0) -> np.ndarray:
    i = np.arange(n, dtype=np.float64)
    golden = (1.0 + 5.0**0.5) / 2.0
    z = 1.0 - (2.0 * i + 1.0) / n
    theta = 2.0 * np.pi * i / golden
    rho = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    return np.column_stack([rho * np.cos(theta), rho * np.sin(theta), z]) * radius


def icosphere(level: int, radius: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Subdivided icosahedron projected to a sphere: 10*4^level + 2 vertices."""
    phi = (1.0 + 5.0**0.5) / 2.0
    verts = [
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.asarray(v, dtype=np.float64) / np.linalg.norm(v) for v in verts]
    for _ in range(level):
        cache: dict = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        subdivided = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            subdivided += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = subdivided
    return np.array(verts) * radius, np.array(faces, dtype=np.int64)


def point_mesh_distance(
    points: np.ndarray, vertices: np.ndarray, triangles: np.ndarray, chunk: int = 32
) -> np.ndarray:
    """Exact distance from each point to the closest triangle of a mesh.

    The closest point on a triangle is either the in-plane projection (when
    its barycentric coordinates are all nonnegative) or a point on one of
    the three edges; taking the minimum over those four candidates is exact.
    """
    tri = vertices[triangles]
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    normal = np.cross(b - a, c - a)
    nn = np.einsum("nk,nk->n", normal, normal)
    v0, v1 = b - a, c - a
    d00 = np.einsum("nk,nk->n", v0, v0)
    d01 = np.einsum("nk,nk->n", v0, v1)
    d11 = np.einsum("nk,nk->n", v1, v1)
    den = d00 * d11 - d01 * d01

    def seg_d2(p, s0, s1):
        d = s1 - s0
        t = np.einsum("mnk,nk->mn", p[:, None, :] - s0[None], d) / np.einsum(
            "nk,nk->n", d, d
        )
        t = np.clip(t, 0.0, 1.0)
        q = s0[None] + t[..., None] * d[None]
        diff = p[:, None, :] - q
        return np.einsum("mnk,mnk->mn", diff, diff)

    out = np.empty(points.shape[0])
    for lo in range(0, points.shape[0], chunk):
        p = points[lo : lo + chunk]
        ap = p[:, None, :] - a[None]
        height = np.einsum("mnk,nk->mn", ap, normal)
        proj = p[:, None, :] - height[..., None] * normal[None] / nn[None, :, None]
        v2 = proj - a[None]
        d20 = np.einsum("mnk,nk->mn", v2, v0)
        d21 = np.einsum("mnk,nk->mn", v2, v1)
        u = (d11 * d20 - d01 * d21) / den
        w = (d00 * d21 - d01 * d20) / den
        inside = (u >= 0.0) & (w >= 0.0) & (u + w <= 1.0)
        d2 = np.where(inside, height**2 / nn[None], np.inf)
        d2 = np.minimum(d2, seg_d2(p, a, b))
        d2 = np.minimum(d2, seg_d2(p, b, c))
        d2 = np.minimum(d2, seg_d2(p, c, a))
        out[lo : lo + chunk] = np.sqrt(d2.min(axis=1))
    return out


def mean_symmetric_distance(
    va: np.ndarray, ta: np.ndarray, vb: np.ndarray, tb: np.ndarray
) -> float:
    """Mean of vertex-to-surface distances taken in both directions."""
    d_ab = point_mesh_distance(va, vb, tb)
    d_ba = point_mesh_distance(vb, va, ta)
    return 0.5 * (float(d_ab.mean()) + float(d_ba.mean()))


def windowed_ssim_direct(
    p1: np.ndarray, p2: np.ndarray, window_size: int = 11, sigma: float = 1.5,
    k1: float = 0.01, k2: float = 0.03,
) -> float:
    """Per-window SSIM evaluated literally, window by window."""
    half = window_size // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2.0 * sigma * sigma))
    k /= k.sum()
    w = np.outer(k, k)
    c1 = (k1 * 1.0) ** 2
    c2 = (k2 * 1.0) ** 2
    h, wd = p1.shape
    values = []
    for r in range(half, h - half):
        for c in range(half, wd - half):
            w1 = p1[r - half : r + half + 1, c - half : c + half + 1]
            w2 = p2[r - half : r + half + 1, c - half : c + half + 1]
            mu1 = float(np.sum(w * w1))
            mu2 = float(np.sum(w * w2))
            s11 = float(np.sum(w * w1 * w1)) - mu1 * mu1
            s22 = float(np.sum(w * w2 * w2)) - mu2 * mu2
            s12 = float(np.sum(w * w1 * w2)) - mu1 * mu2
            num = (2.0 * mu1 * mu2 + c1) * (2.0 * s12 + c2)
            den = (mu1 * mu1 + mu2 * mu2 + c1) * (s11 + s22 + c2)
            values.append(num / den)
    return float(np.mean(values))
