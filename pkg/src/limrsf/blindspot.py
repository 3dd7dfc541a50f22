"""Blind-spot ground truth on the cloud, mesh-to-cloud mapping, and metrics.

Ground truth: per-point densities are closed-ball neighbor counts (the point
itself included, so every density is >= 1); the low-density set G is
everything strictly below the nearest-rank percentile of those densities.
Prediction: M is every cloud point within the mapping radius of at least one
highlighted mesh vertex. The confusion counts compare the two sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .geometry import PointCloud, SpatialIndex
from .mesh import TriangleMesh


@dataclass
class DensityProfile:
    """Per-point neighbor counts within a fixed radius."""

    densities: np.ndarray  # (N,) int64, each >= 1
    radius: float


@dataclass
class GroundTruthSet:
    """Indices of points strictly below the percentile density threshold."""

    indices: np.ndarray  # sorted int64
    threshold: float
    percentile: float


@dataclass
class MappedSet:
    """Cloud points within the mapping radius of some highlighted vertex."""

    indices: np.ndarray  # sorted int64
    map_radius: float


@dataclass
class DetectionReport:
    """Confusion counts and the four derived metrics.

    Conventions for empty sets: precision is 0 when TP+FP = 0, recall is 0
    when TP+FN = 0, f1 is 0 when precision+recall = 0, and iou is 0 when all
    three counts are 0.
    """

    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    iou: float

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "iou": self.iou,
        }


def estimate_point_density(cloud: PointCloud, radius: float) -> DensityProfile:
    """Count, for every point, the cloud points within the closed ball of ``radius``."""
    if len(cloud) == 0:
        raise ValidationError("cannot estimate densities on an empty cloud")
    counts = SpatialIndex(cloud.points).count_within(cloud.points, radius)
    return DensityProfile(densities=counts, radius=float(radius))


def nearest_rank_threshold(densities: np.ndarray, percentile: float) -> float:
    """Nearest-rank percentile: the value at 1-based index ceil(P*N/100) ascending."""
    n = densities.shape[0]
    if n == 0:
        raise ValidationError("empty density profile")
    if not 0.0 < percentile < 100.0:
        raise ValidationError(f"percentile must lie strictly between 0 and 100, got {percentile!r}")
    # (P * N) / 100 keeps integer-valued inputs exact in float arithmetic.
    rank = math.ceil((percentile * n) / 100.0)
    return float(np.sort(densities)[rank - 1])


def identify_low_density(profile: DensityProfile, percentile: float) -> GroundTruthSet:
    """Points whose density is strictly below the nearest-rank percentile value."""
    threshold = nearest_rank_threshold(profile.densities, percentile)
    indices = np.flatnonzero(profile.densities < threshold).astype(np.int64)
    return GroundTruthSet(indices=indices, threshold=threshold, percentile=float(percentile))


def map_blind_spots(mesh: TriangleMesh, cloud: PointCloud, map_radius: float) -> MappedSet:
    """Union of cloud points within ``map_radius`` of each highlighted vertex."""
    if mesh.highlight is None:
        raise ValidationError("mesh has no highlight flags; run highlight_blind_spots first")
    if not (map_radius > 0.0):
        raise ValidationError(f"map_radius must be positive, got {map_radius!r}")
    flagged = mesh.vertices[mesh.highlight]
    if flagged.shape[0] == 0 or len(cloud) == 0:
        return MappedSet(indices=np.empty(0, dtype=np.int64), map_radius=float(map_radius))
    _, points = SpatialIndex(cloud.points).pairs_within(flagged, map_radius)
    return MappedSet(indices=np.unique(points), map_radius=float(map_radius))


def ground_truth_from_boxes(cloud: PointCloud, boxes, collar: float) -> np.ndarray:
    """Indices of cloud points within ``collar`` of any axis-aligned box.

    ``boxes`` is an iterable of (lo, hi) corner pairs. Distance to a box is
    the Euclidean distance to its closed volume (0 inside).
    """
    if not (collar > 0.0):
        raise ValidationError(f"collar must be positive, got {collar!r}")
    hit = np.zeros(len(cloud), dtype=bool)
    for lo, hi in boxes:
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        gap = np.maximum(np.maximum(lo - cloud.points, cloud.points - hi), 0.0)
        hit |= np.sum(gap**2, axis=1) <= collar * collar
    return np.flatnonzero(hit).astype(np.int64)


def detection_metrics_from_counts(tp: int, fp: int, fn: int) -> DetectionReport:
    """Precision/recall/f1/IoU from raw confusion counts."""
    for name, value in (("tp", tp), ("fp", fp), ("fn", fn)):
        if not isinstance(value, (int, np.integer)) or value < 0:
            raise ValidationError(f"{name} must be a nonnegative integer, got {value!r}")
    tp, fp, fn = int(tp), int(fp), int(fn)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    iou = tp / (tp + fp + fn) if tp + fp + fn else 0.0
    return DetectionReport(tp=tp, fp=fp, fn=fn, precision=precision, recall=recall, f1=f1, iou=iou)


def detection_metrics(mapped: MappedSet, truth: GroundTruthSet) -> DetectionReport:
    """Compare the mapped set M against the ground-truth set G."""
    m = np.unique(np.asarray(mapped.indices, dtype=np.int64))
    g = np.unique(np.asarray(truth.indices, dtype=np.int64))
    tp = int(np.intersect1d(m, g, assume_unique=True).size)
    return detection_metrics_from_counts(tp, int(m.size) - tp, int(g.size) - tp)
