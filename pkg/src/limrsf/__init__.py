"""Desk-scale scan-to-hologram pipeline.

Point cloud in; statistically filtered cloud, oriented normals, implicit
surface reconstruction, blind-spot highlighting, quadric simplification,
and a broadcast mesh stream out — plus the evaluation metrics to score
the detector and compare rendered views.
"""

__version__ = "0.1.0"

from .blindspot import (
    DetectionReport,
    detection_metrics,
    detection_metrics_from_counts,
    estimate_point_density,
    identify_low_density,
    map_blind_spots,
)
from .config import PipelineConfig, emit_config, load_config, parse_config
from .errors import LimrsfError
from .geometry import (
    NormalParams,
    OutlierParams,
    PointCloud,
    SpatialIndex,
    estimate_normals,
    remove_statistical_outliers,
)
from .imaging import Image, load_image, mse, psnr, ssim
from .mesh import TriangleMesh
from .meshops import HighlightParams, compute_vertex_densities, highlight_blind_spots, transfer_colors
from .pipeline import PipelineResult, build_highlighted_mesh, run_pipeline
from .ply import load_mesh, load_point_cloud, save_mesh, save_point_cloud
from .poisson import ReconstructionParams, poisson_reconstruct
from .protocol import MeshMessage, decode_mesh, encode_frame, encode_mesh
from .scene import Box, SceneSpec, default_scene, generate_room_scan
from .simplify import simplify_mesh
from .stream import MeshStreamServer, fetch_once

__all__ = [
    "__version__",
    "LimrsfError",
    "PointCloud",
    "SpatialIndex",
    "OutlierParams",
    "NormalParams",
    "remove_statistical_outliers",
    "estimate_normals",
    "TriangleMesh",
    "ReconstructionParams",
    "poisson_reconstruct",
    "HighlightParams",
    "transfer_colors",
    "compute_vertex_densities",
    "highlight_blind_spots",
    "simplify_mesh",
    "DetectionReport",
    "estimate_point_density",
    "identify_low_density",
    "map_blind_spots",
    "detection_metrics",
    "detection_metrics_from_counts",
    "Image",
    "load_image",
    "mse",
    "psnr",
    "ssim",
    "MeshMessage",
    "encode_mesh",
    "decode_mesh",
    "encode_frame",
    "MeshStreamServer",
    "fetch_once",
    "Box",
    "SceneSpec",
    "default_scene",
    "generate_room_scan",
    "PipelineConfig",
    "parse_config",
    "emit_config",
    "load_config",
    "load_point_cloud",
    "save_point_cloud",
    "load_mesh",
    "save_mesh",
    "PipelineResult",
    "build_highlighted_mesh",
    "run_pipeline",
]
