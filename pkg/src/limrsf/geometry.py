"""Point cloud container, exact neighbor queries, outlier removal, normals.

The neighbor-query contract here is deliberately strict: every query returns
exactly what a brute-force scan using the distance expression

    d(p, q) = sqrt((px - qx)**2 + (py - qy)**2 + (pz - qz)**2)

evaluated in float64 would return, with k-nearest-neighbor ties broken by the
lower point index and radius queries using a closed ball (<= r). A k-d tree is
used only to prune candidates; membership and ordering are always decided by
recomputing that expression in numpy.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .errors import ValidationError

# Candidate radii are inflated by this much before pruning so that points
# whose true distance is within a rounding error of the cutoff are never
# missed; the exact comparison afterwards discards any extras.
_REL_SLACK = 1e-9
_ABS_SLACK = 1e-12

_PAIR_CHUNK = 4096


def _inflate(r: float) -> float:
    return r * (1.0 + _REL_SLACK) + _ABS_SLACK


def _as_point_array(value, name: str, rows: Optional[int] = None, cols: int = 3) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != cols:
        raise ValidationError(f"{name} must have shape (N, {cols}), got {arr.shape}")
    if rows is not None and arr.shape[0] != rows:
        raise ValidationError(f"{name} must have {rows} rows, got {arr.shape[0]}")
    if arr.size and not np.isfinite(arr).all():
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def _as_query_point(value) -> np.ndarray:
    q = np.asarray(value, dtype=np.float64).reshape(-1)
    if q.shape != (3,):
        raise ValidationError(f"query point must have 3 coordinates, got shape {np.shape(value)}")
    if not np.isfinite(q).all():
        raise ValidationError("query point contains non-finite values")
    return q


@dataclass
class PointCloud:
    """Positions with optional per-point colors and normals.

    Instances are treated as immutable: operations return new clouds and
    never write into an existing one.

    Attributes:
        points: (N, 3) float64 positions, all finite.
        colors: optional (N, 3) float64 RGB, each channel in [0, 1].
        normals: optional (N, 3) float64; each row is either a unit vector
            (norm within 1e-6 of 1) or exactly zero. A zero row marks a point
            whose neighborhood was too degenerate for a normal estimate.
    """

    points: np.ndarray
    colors: Optional[np.ndarray] = None
    normals: Optional[np.ndarray] = None

    def __post_init__(self):
        self.points = _as_point_array(self.points, "points")
        n = self.points.shape[0]
        if self.colors is not None:
            self.colors = _as_point_array(self.colors, "colors", rows=n)
            if self.colors.size and (self.colors.min() < 0.0 or self.colors.max() > 1.0):
                raise ValidationError("colors must lie in [0, 1]")
        if self.normals is not None:
            self.normals = _as_point_array(self.normals, "normals", rows=n)
            if self.normals.size:
                norms = np.sqrt(np.sum(self.normals**2, axis=1))
                ok = (np.abs(norms - 1.0) <= 1e-6) | (norms == 0.0)
                if not ok.all():
                    bad = int(np.flatnonzero(~ok)[0])
                    raise ValidationError(
                        f"normal {bad} has norm {norms[bad]!r}; expected 1 (+/- 1e-6) or exactly 0"
                    )

    def __len__(self) -> int:
        return self.points.shape[0]

    def select(self, indices) -> "PointCloud":
        """Return a new cloud keeping ``indices`` (mask or index array), in order."""
        return PointCloud(
            points=self.points[indices].copy(),
            colors=None if self.colors is None else self.colors[indices].copy(),
            normals=None if self.normals is None else self.normals[indices].copy(),
        )


class SpatialIndex:
    """Exact Euclidean neighbor queries over a fixed point set.

    Safe for concurrent read-only use from multiple threads; nothing is
    mutated after construction.
    """

    def __init__(self, points):
        if isinstance(points, PointCloud):
            points = points.points
        self.points = _as_point_array(points, "points")
        if self.points.shape[0] == 0:
            raise ValidationError("cannot index an empty point set")
        self._tree = cKDTree(self.points)

    def __len__(self) -> int:
        return self.points.shape[0]

    def _exact_distances(self, indices: np.ndarray, query: np.ndarray) -> np.ndarray:
        diff = self.points[indices] - query
        return np.sqrt(np.sum(diff**2, axis=1))

    def knn(self, query, k: int) -> list[tuple[int, float]]:
        """The k nearest indexed points to ``query``.

        Returns ``[(index, distance), ...]`` ascending by distance, ties
        broken by the lower index. ``k`` must not exceed the population.
        """
        query = _as_query_point(query)
        if not isinstance(k, (int, np.integer)) or k < 1:
            raise ValidationError(f"k must be a positive integer, got {k!r}")
        n = len(self)
        if k > n:
            raise ValidationError(f"k={k} exceeds indexed population {n}")

        upper, _ = self._tree.query(query, k=k)
        radius = _inflate(float(np.max(upper)))
        candidates = self._tree.query_ball_point(query, radius)
        while len(candidates) < k:  # paranoia: slack too tight for exotic data
            radius = radius * 2.0 + _ABS_SLACK
            candidates = self._tree.query_ball_point(query, radius)

        idx = np.asarray(candidates, dtype=np.int64)
        dist = self._exact_distances(idx, query)
        order = np.lexsort((idx, dist))[:k]
        return [(int(idx[j]), float(dist[j])) for j in order]

    def radius_search(self, query, r: float) -> np.ndarray:
        """Indices of all points with distance <= r, ascending by index."""
        query = _as_query_point(query)
        if not (r > 0.0):
            raise ValidationError(f"radius must be positive, got {r!r}")
        candidates = self._tree.query_ball_point(query, _inflate(float(r)))
        idx = np.asarray(candidates, dtype=np.int64)
        if idx.size == 0:
            return idx
        keep = self._exact_distances(idx, query) <= r
        return np.sort(idx[keep])

    def _pair_chunks(self, queries: np.ndarray, r: float):
        """Yield exact (query_row, point_index) pairs with distance <= r, chunked."""
        inflated = _inflate(float(r))
        for start in range(0, queries.shape[0], _PAIR_CHUNK):
            block = queries[start : start + _PAIR_CHUNK]
            coo = cKDTree(block).sparse_distance_matrix(
                self._tree, inflated, output_type="coo_matrix"
            )
            if coo.nnz == 0:
                continue
            qi = coo.row.astype(np.int64) + start
            pj = coo.col.astype(np.int64)
            diff = queries[qi] - self.points[pj]
            keep = np.sqrt(np.sum(diff**2, axis=1)) <= r
            yield qi[keep], pj[keep]

    def count_within(self, queries, r: float) -> np.ndarray:
        """Number of indexed points within the closed ball of radius r per query row."""
        queries = _as_point_array(queries, "queries")
        if not (r > 0.0):
            raise ValidationError(f"radius must be positive, got {r!r}")
        counts = np.zeros(queries.shape[0], dtype=np.int64)
        for qi, _ in self._pair_chunks(queries, r):
            counts += np.bincount(qi, minlength=counts.size)
        return counts

    def pairs_within(self, queries, r: float) -> tuple[np.ndarray, np.ndarray]:
        """All (query_row, point_index) pairs with distance <= r."""
        queries = _as_point_array(queries, "queries")
        if not (r > 0.0):
            raise ValidationError(f"radius must be positive, got {r!r}")
        rows, cols = [], []
        for qi, pj in self._pair_chunks(queries, r):
            rows.append(qi)
            cols.append(pj)
        if not rows:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty.copy()
        return np.concatenate(rows), np.concatenate(cols)


@dataclass
class OutlierParams:
    """Statistical outlier removal parameters.

    ``k`` is the neighbor count for the per-point mean distance and
    ``std_ratio`` scales the standard deviation in the removal threshold.
    """

    k: int = 20
    std_ratio: float = 2.0

    def __post_init__(self):
        if not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise ValidationError(f"k must be a positive integer, got {self.k!r}")
        self.k = int(self.k)
        self.std_ratio = float(self.std_ratio)
        if not (self.std_ratio > 0.0 and np.isfinite(self.std_ratio)):
            raise ValidationError(f"std_ratio must be positive, got {self.std_ratio!r}")


@dataclass
class DistanceStats:
    """Per-point mean k-NN distances and the derived removal threshold.

    ``threshold`` is exactly ``mu_d + std_ratio * sigma_d`` as computed;
    ``sigma_d`` is the population (1/N) standard deviation.
    """

    mean_knn_distance: np.ndarray
    mu_d: float
    sigma_d: float
    threshold: float


def remove_statistical_outliers(
    cloud: PointCloud, params: OutlierParams
) -> tuple[PointCloud, np.ndarray, DistanceStats]:
    """Drop points whose mean distance to their k nearest neighbors is anomalous.

    For each point, the mean distance d_i to its k nearest neighbors
    (excluding the point itself; coincident duplicates still count) is
    computed, then points with d_i strictly greater than
    mu_d + std_ratio * sigma_d are removed. Colors and normals are filtered
    in lockstep and survivor order is preserved.

    Returns:
        (filtered cloud, removed indices ascending, DistanceStats)
    """
    n = len(cloud)
    if n <= params.k:
        raise ValidationError(
            f"outlier removal with k={params.k} needs more than k points, got {n}"
        )
    pts = cloud.points
    tree = cKDTree(pts)
    _, idx = tree.query(pts, k=params.k + 1, workers=-1)
    # Recompute distances with the canonical expression, sort each row, and
    # drop exactly one zero entry (the point itself; any remaining zeros are
    # genuine coincident neighbors).
    diff = pts[idx] - pts[:, None, :]
    dist = np.sort(np.sqrt(np.sum(diff**2, axis=2)), axis=1)
    d_i = dist[:, 1:].mean(axis=1)

    mu = float(d_i.mean())
    sigma = float(d_i.std())
    threshold = mu + params.std_ratio * sigma
    removed_mask = d_i > threshold
    removed = np.flatnonzero(removed_mask).astype(np.int64)
    stats = DistanceStats(mean_knn_distance=d_i, mu_d=mu, sigma_d=sigma, threshold=threshold)
    return cloud.select(~removed_mask), removed, stats


@dataclass
class NormalParams:
    """Normal estimation parameters.

    ``radius`` bounds the local neighborhood, ``viewpoint`` orients every
    normal to face it, and neighborhoods smaller than ``min_neighbors``
    (or ones that do not span a plane) yield a zero normal instead.
    """

    radius: float = 0.5
    viewpoint: tuple[float, float, float] = (0.0, 0.0, 0.0)
    min_neighbors: int = 3

    def __post_init__(self):
        self.radius = float(self.radius)
        if not (self.radius > 0.0 and np.isfinite(self.radius)):
            raise ValidationError(f"radius must be positive, got {self.radius!r}")
        vp = np.asarray(self.viewpoint, dtype=np.float64).reshape(-1)
        if vp.shape != (3,) or not np.isfinite(vp).all():
            raise ValidationError(f"viewpoint must be 3 finite coordinates, got {self.viewpoint!r}")
        self.viewpoint = (float(vp[0]), float(vp[1]), float(vp[2]))
        if not isinstance(self.min_neighbors, (int, np.integer)) or self.min_neighbors < 1:
            raise ValidationError(
                f"min_neighbors must be a positive integer, got {self.min_neighbors!r}"
            )
        self.min_neighbors = int(self.min_neighbors)


# Rank test for the covariance: the neighborhood is degenerate (coincident or
# collinear) when the middle eigenvalue vanishes relative to the largest.
_RANK_EPS = 1e-12


def estimate_normals(cloud: PointCloud, params: NormalParams) -> PointCloud:
    """Estimate a unit normal per point by local plane fitting.

    The neighborhood of p_i is every point within ``params.radius``
    (closed ball, p_i included). The normal is the eigenvector of the
    smallest eigenvalue of the neighborhood covariance, flipped so that
    dot(normal, viewpoint - p_i) >= 0. Points with fewer than
    ``min_neighbors`` neighbors, or with a coincident/collinear
    neighborhood, get a zero normal.

    The covariance is accumulated from raw first and second moments in one
    sparse matrix product per block of points, which keeps the radius-0.5
    default tractable on full room scans.
    """
    n = len(cloud)
    if n == 0:
        raise ValidationError("cannot estimate normals on an empty cloud")
    pts = cloud.points
    tree = cKDTree(pts)
    inflated = _inflate(params.radius)

    normals = np.zeros((n, 3), dtype=np.float64)
    degenerate = np.zeros(n, dtype=bool)
    viewpoint = np.asarray(params.viewpoint, dtype=np.float64)

    features = np.empty((n, 10), dtype=np.float64)
    for start in range(0, n, 2 * _PAIR_CHUNK):
        stop = min(start + 2 * _PAIR_CHUNK, n)
        block = pts[start:stop]
        # Shift to the block centroid before forming products: the covariance
        # is translation invariant, and small local coordinates keep the
        # moment subtraction well conditioned.
        center = block.mean(axis=0)
        shifted = pts - center
        features[:, 0] = 1.0
        features[:, 1:4] = shifted
        col = 4
        for a in range(3):
            for b in range(a, 3):
                features[:, col] = shifted[:, a] * shifted[:, b]
                col += 1

        coo = cKDTree(block).sparse_distance_matrix(tree, inflated, output_type="coo_matrix")
        keep = coo.data <= params.radius
        adj = sp.csr_matrix(
            (np.ones(int(keep.sum()), dtype=np.float64), (coo.row[keep], coo.col[keep])),
            shape=(stop - start, n),
        )
        sums = adj @ features

        counts = sums[:, 0]
        block_deg = counts < params.min_neighbors
        safe = np.maximum(counts, 1.0)
        mean = sums[:, 1:4] / safe[:, None]
        m2 = sums[:, 4:10] / safe[:, None]

        cov = np.empty((stop - start, 3, 3), dtype=np.float64)
        cov[:, 0, 0] = m2[:, 0] - mean[:, 0] * mean[:, 0]
        cov[:, 0, 1] = cov[:, 1, 0] = m2[:, 1] - mean[:, 0] * mean[:, 1]
        cov[:, 0, 2] = cov[:, 2, 0] = m2[:, 2] - mean[:, 0] * mean[:, 2]
        cov[:, 1, 1] = m2[:, 3] - mean[:, 1] * mean[:, 1]
        cov[:, 1, 2] = cov[:, 2, 1] = m2[:, 4] - mean[:, 1] * mean[:, 2]
        cov[:, 2, 2] = m2[:, 5] - mean[:, 2] * mean[:, 2]

        eigvals, eigvecs = np.linalg.eigh(cov)
        block_deg |= eigvals[:, 1] <= _RANK_EPS * np.maximum(eigvals[:, 2], 1e-30)

        candidate = eigvecs[:, :, 0]
        flip = np.sum(candidate * (viewpoint - block), axis=1) < 0.0
        candidate[flip] *= -1.0
        norm = np.sqrt(np.sum(candidate**2, axis=1))
        candidate /= np.maximum(norm, 1e-300)[:, None]

        candidate[block_deg] = 0.0
        normals[start:stop] = candidate
        degenerate[start:stop] = block_deg

    return replace(cloud, normals=normals)
