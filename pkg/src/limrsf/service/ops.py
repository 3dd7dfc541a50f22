"""Operation handlers behind both the HTTP endpoints and the CLI.

Each handler takes one request model and returns one response model;
transport concerns (HTTP status codes, CLI exit codes) stay in the
respective front ends.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from .. import blindspot, imaging, pipeline, ply, scene
from ..config import PipelineConfig, apply_overrides, load_config
from ..simplify import simplify_mesh
from . import models


def resolve_config(config_path: Optional[str], overrides: dict) -> PipelineConfig:
    """Defaults, then the config file, then explicit overrides (which win)."""
    config = load_config(config_path) if config_path else PipelineConfig()
    return apply_overrides(config, overrides)


def load_regions(path) -> list[scene.Box]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [scene.Box(lo=tuple(map(float, lo)), hi=tuple(map(float, hi))) for lo, hi in data]


def scan(req: models.ScanRequest) -> models.ScanResponse:
    spec = req.scene.to_spec()
    cloud, regions = scene.generate_room_scan(spec)
    ply.save_point_cloud(cloud, req.out_path)
    boxes = [(b.lo, b.hi) for b in regions]
    if req.regions_path is not None:
        Path(req.regions_path).write_text(
            json.dumps([[list(lo), list(hi)] for lo, hi in boxes], indent=2) + "\n",
            encoding="utf-8",
        )
    return models.ScanResponse(
        points=len(cloud), out_path=req.out_path, regions=boxes, regions_path=req.regions_path
    )


def run(req: models.RunRequest) -> models.RunResponse:
    config = resolve_config(req.config_path, req.overrides)
    regions = load_regions(req.regions_path) if req.regions_path else None
    source = req.scene.to_spec() if req.scene is not None else req.input_path
    result = pipeline.run_pipeline(source, config, out_dir=req.out_dir, regions=regions)
    return models.RunResponse(
        mesh_path=str(result.mesh_path),
        simplified_path=str(result.simplified_path),
        report_path=str(result.report_path),
        detection=models.DetectionBlockModel(**result.report["detection"]),
        report=pipeline.jsonify(result.report),
    )


def reconstruct(req: models.ReconstructRequest) -> models.ReconstructResponse:
    config = resolve_config(req.config_path, req.overrides)
    cloud = ply.load_point_cloud(req.input_path)
    _, mesh = pipeline.build_highlighted_mesh(cloud, config)
    ply.save_mesh(mesh, req.out_path)
    return models.ReconstructResponse(
        vertices=mesh.vertex_count,
        triangles=mesh.triangle_count,
        highlighted=int(np.sum(mesh.highlight)),
        out_path=req.out_path,
    )


def simplify(req: models.SimplifyRequest) -> models.SimplifyResponse:
    mesh = ply.load_mesh(req.input_path)
    simplified = simplify_mesh(mesh, req.target_vertices)
    ply.save_mesh(simplified, req.out_path)
    return models.SimplifyResponse(
        vertices=simplified.vertex_count,
        triangles=simplified.triangle_count,
        out_path=req.out_path,
    )


def detect(req: models.DetectRequest) -> models.DetectResponse:
    mesh = ply.load_mesh(req.mesh_path)
    cloud = ply.load_point_cloud(req.cloud_path)
    regions = load_regions(req.regions_path) if req.regions_path else None
    block = pipeline.evaluate_detection(
        mesh,
        cloud,
        percentile=req.percentile,
        map_radius=req.map_radius,
        density_radius=req.density_radius,
        regions=regions,
    )
    return models.DetectResponse(**block)


def eval_blindspots(req: models.EvalBlindspotsRequest) -> models.DetectionMetricsModel:
    report = blindspot.detection_metrics_from_counts(req.tp, req.fp, req.fn)
    return models.DetectionMetricsModel(**report.to_dict())


def eval_images(req: models.EvalImagesRequest) -> models.ImageMetricsResponse:
    reference = imaging.load_image(req.reference_path)
    test = imaging.load_image(req.test_path)
    error = imaging.mse(reference, test)
    peak = imaging.psnr(reference, test)
    return models.ImageMetricsResponse(
        mse=error,
        psnr="inf" if math.isinf(peak) else peak,
        ssim=imaging.ssim(reference, test),
    )
