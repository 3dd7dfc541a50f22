"""Synthetic room scans with planted blind spots.

A scene is a rectangular room sampled on a uniform grid over five interior
faces (floor, ceiling, and three walls; the face y = depth stays open, as a
scanner standing there would leave it). Hole boxes carve unsampled patches
out of the faces; together with the open face they form the ground-truth
blind regions the detector is judged against. Positions carry Gaussian
noise and are quantized to float32 so that a saved scan reloads
bit-identically; colors come from a position hash, not the RNG.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ValidationError
from .geometry import PointCloud

_EDGE_EPS = 1e-9  # absorbs float division error in grid counts
OPEN_FACE_DEPTH = 0.05  # thickness of the ground-truth box on the open face


class Box(NamedTuple):
    """Closed axis-aligned box given by opposite corners."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def contains(self, points: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.lo, dtype=np.float64)
        hi = np.asarray(self.hi, dtype=np.float64)
        return np.all((points >= lo) & (points <= hi), axis=1)


@dataclass(frozen=True)
class SceneSpec:
    room: tuple[float, float, float] = (2.4, 2.0, 2.0)  # W x D x H meters
    spacing: float = 0.02
    holes: tuple[Box, ...] = ()
    noise_sigma: float = 0.005
    outliers: int = 300
    seed: int = 0

    def __post_init__(self):
        if not all(e > 0.0 for e in self.room):
            raise ValidationError(f"room extents must be positive, got {self.room!r}")
        if not self.spacing > 0.0:
            raise ValidationError(f"spacing must be positive, got {self.spacing!r}")
        if self.noise_sigma < 0.0:
            raise ValidationError(f"noise_sigma must be >= 0, got {self.noise_sigma!r}")
        if self.outliers < 0:
            raise ValidationError(f"outliers must be >= 0, got {self.outliers!r}")
        for box in self.holes:
            lo, hi = np.asarray(box.lo, float), np.asarray(box.hi, float)
            if lo.shape != (3,) or hi.shape != (3,):
                raise ValidationError(f"hole corners must be 3-vectors: {box!r}")
            if np.any(lo > hi):
                raise ValidationError(f"hole has inverted corners: {box!r}")
            if np.any(lo < -_EDGE_EPS) or np.any(hi > np.asarray(self.room) + _EDGE_EPS):
                raise ValidationError(f"hole lies outside the room: {box!r}")


def default_scene(seed: int = 0) -> SceneSpec:
    """The reference scene: one 1 m x 1 m hole in the wall at y = 0."""
    return SceneSpec(
        holes=(Box(lo=(0.7, 0.0, 0.5), hi=(1.7, 0.05, 1.5)),),
        seed=seed,
    )


def blind_regions(spec: SceneSpec) -> list[Box]:
    """Ground-truth blind boxes: the planted holes plus the unscanned open face."""
    w, d, h = spec.room
    open_face = Box(lo=(0.0, d - OPEN_FACE_DEPTH, 0.0), hi=(w, d, h))
    return list(spec.holes) + [open_face]


def _axis_samples(extent: float, spacing: float) -> np.ndarray:
    n = int(math.floor(extent / spacing + _EDGE_EPS)) + 1
    return np.arange(n, dtype=np.float64) * spacing


def _face(u: np.ndarray, v: np.ndarray, plane_axis: int, plane_value: float) -> np.ndarray:
    uu, vv = np.meshgrid(u, v, indexing="ij")
    cols = [uu.ravel(), vv.ravel()]
    cols.insert(plane_axis, np.full(uu.size, plane_value))
    return np.column_stack(cols)


def _position_hash_colors(points_f32: np.ndarray) -> np.ndarray:
    """RGB on the 1/255 lattice, mixed from the float32 coordinate bits."""
    bits = np.ascontiguousarray(points_f32).view(np.uint32).astype(np.uint64)
    h = bits[:, 0] * np.uint64(0x9E3779B97F4A7C15)
    h ^= bits[:, 1] * np.uint64(0xC2B2AE3D27D4EB4F)
    h ^= bits[:, 2] * np.uint64(0x165667B19E3779F9)
    h ^= h >> np.uint64(30)
    h *= np.uint64(0xBF58476D1CE4E5B9)
    h ^= h >> np.uint64(27)
    h *= np.uint64(0x94D049BB133111EB)
    h ^= h >> np.uint64(31)
    rgb = np.stack([(h >> np.uint64(s)) & np.uint64(0xFF) for s in (0, 8, 16)], axis=1)
    return rgb.astype(np.float64) / 255.0


def generate_room_scan(spec: SceneSpec) -> tuple[PointCloud, list[Box]]:
    """Sample the room a SceneSpec describes; returns the cloud and its blind regions.

    Sampling order is fixed (floor, ceiling, wall y=0, wall x=0, wall x=W,
    then outliers) and every random draw comes from one seeded generator,
    so equal specs give bit-identical clouds.
    """
    w, d, h = spec.room
    xs, ys, zs = (_axis_samples(e, spec.spacing) for e in spec.room)
    faces = [
        _face(xs, ys, 2, 0.0),  # floor
        _face(xs, ys, 2, h),  # ceiling
        _face(xs, zs, 1, 0.0),  # wall y = 0
        _face(ys, zs, 0, 0.0),  # wall x = 0
        _face(ys, zs, 0, w),  # wall x = W
    ]
    lattice = np.concatenate(faces, axis=0)
    if spec.holes:
        inside = np.zeros(lattice.shape[0], dtype=bool)
        for box in spec.holes:
            inside |= box.contains(lattice)
        lattice = lattice[~inside]

    rng = np.random.default_rng(spec.seed)
    points = lattice
    if spec.noise_sigma > 0.0:
        points = points + rng.normal(0.0, spec.noise_sigma, size=points.shape)
    if spec.outliers:
        center = np.asarray(spec.room) / 2.0
        half = np.asarray(spec.room) * 5.0
        stray = rng.uniform(center - half, center + half, size=(spec.outliers, 3))
        points = np.concatenate([points, stray], axis=0)

    quantized = points.astype(np.float32)
    cloud = PointCloud(
        points=quantized.astype(np.float64),
        colors=_position_hash_colors(quantized),
    )
    return cloud, blind_regions(spec)


def spec_to_dict(spec: SceneSpec) -> dict:
    return {
        "room": list(spec.room),
        "spacing": spec.spacing,
        "holes": [[list(b.lo), list(b.hi)] for b in spec.holes],
        "noise_sigma": spec.noise_sigma,
        "outliers": spec.outliers,
        "seed": spec.seed,
    }


def spec_from_dict(data: dict) -> SceneSpec:
    known = {"room", "spacing", "holes", "noise_sigma", "outliers", "seed"}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown scene fields: {sorted(unknown)}")
    kwargs = dict(data)
    if "room" in kwargs:
        kwargs["room"] = tuple(float(v) for v in kwargs["room"])
    if "holes" in kwargs:
        kwargs["holes"] = tuple(
            Box(lo=tuple(map(float, lo)), hi=tuple(map(float, hi)))
            for lo, hi in kwargs["holes"]
        )
    return SceneSpec(**kwargs)
