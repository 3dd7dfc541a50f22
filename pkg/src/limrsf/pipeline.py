"""End-to-end orchestration: scan to filtered cloud to highlighted meshes.

Stage order: load/generate → outlier removal → normal estimation →
reconstruction → color transfer → vertex densities → highlighting →
blind-spot evaluation → simplification → artifact writing. Every stage is
individually timed and any failure aborts with the stage name and cause.

Evaluation runs against the filtered cloud in two ground-truth modes:
low-density points of the cloud itself (percentile cut), and, when the
input is synthetic, the planted blind-region boxes. Both appear in the
report under separate keys.

With identical inputs, config, and seed the pipeline is deterministic;
only the ``timings_ms`` block of the report varies between runs.
"""

from __future__ import annotations

import json
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import blindspot, meshops, ply, scene
from .config import PipelineConfig
from .errors import PipelineStageError
from .geometry import NormalParams, OutlierParams, PointCloud, estimate_normals, remove_statistical_outliers
from .mesh import TriangleMesh
from .poisson import ReconstructionParams, poisson_reconstruct
from .simplify import simplify_mesh

REPORT_SCHEMA = 1

Source = Union[PointCloud, scene.SceneSpec, str, Path]


@dataclass
class PipelineResult:
    mesh: TriangleMesh
    simplified: TriangleMesh
    report: dict
    mesh_path: Optional[Path] = None
    simplified_path: Optional[Path] = None
    report_path: Optional[Path] = None


@dataclass
class _Timings:
    ms: dict = field(default_factory=dict)

    @contextmanager
    def stage(self, name: str):
        start = time.perf_counter()
        try:
            yield
        except Exception as exc:
            raise PipelineStageError(stage=name, cause=exc) from exc
        finally:
            self.ms[name] = (time.perf_counter() - start) * 1000.0


def _resolve_viewpoint(spec, cloud: PointCloud) -> tuple[float, float, float]:
    if spec == "auto":
        lo = cloud.points.min(axis=0)
        hi = cloud.points.max(axis=0)
        return tuple((lo + hi) / 2.0)
    return tuple(float(v) for v in spec)


def jsonify(value):
    """JSON-safe copy; non-finite floats become strings ("inf", "-inf", "nan")."""
    if isinstance(value, dict):
        return {k: jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonify(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    return value


def report_json(report: dict) -> str:
    return json.dumps(jsonify(report), indent=2, sort_keys=True) + "\n"


def strip_timings(report: dict) -> dict:
    """The report minus its only run-to-run varying block."""
    return {k: v for k, v in report.items() if k != "timings_ms"}


def build_highlighted_mesh(
    cloud: PointCloud,
    config: Optional[PipelineConfig] = None,
    timings: Optional[_Timings] = None,
    report: Optional[dict] = None,
) -> tuple[PointCloud, TriangleMesh]:
    """Outlier removal through highlighting; the shared middle of the pipeline.

    Returns the filtered cloud (evaluation runs against it) and the
    highlighted full-resolution mesh.
    """
    config = config or PipelineConfig()
    timings = timings if timings is not None else _Timings()
    report = report if report is not None else {}

    with timings.stage("outlier_removal"):
        filtered, removed, stats = remove_statistical_outliers(
            cloud, OutlierParams(k=config.outlier.k, std_ratio=config.outlier.std_ratio)
        )
        report["outlier_removal"] = {
            "removed": int(removed.size),
            "kept": len(filtered),
            "mean_distance": stats.mu_d,
            "std_distance": stats.sigma_d,
            "threshold": stats.threshold,
        }

    with timings.stage("normals"):
        viewpoint = _resolve_viewpoint(config.normals.viewpoint, filtered)
        oriented = estimate_normals(
            filtered, NormalParams(radius=config.normals.radius, viewpoint=viewpoint)
        )
        degenerate = int(np.sum(~np.any(oriented.normals != 0.0, axis=1)))
        report["normals"] = {"viewpoint": list(viewpoint), "degenerate": degenerate}

    with timings.stage("poisson"):
        mesh = poisson_reconstruct(
            oriented,
            ReconstructionParams(
                depth=config.poisson.depth,
                smoothing_radius=config.poisson.smoothing_radius,
                density_radius=config.density.radius,
                iso_offset=config.poisson.iso_offset,
            ),
        )
        report["poisson"] = {
            "vertices": mesh.vertex_count,
            "triangles": mesh.triangle_count,
            "depth": config.poisson.depth,
        }

    with timings.stage("color_transfer"):
        mesh = meshops.transfer_colors(mesh, filtered)

    with timings.stage("density"):
        mesh = meshops.compute_vertex_densities(mesh, filtered, config.density.radius)

    with timings.stage("highlight"):
        params = meshops.HighlightParams(
            density_threshold=config.highlight.density_threshold,
            base_alpha=config.highlight.base_alpha,
            highlight_alpha=config.highlight.highlight_alpha,
        )
        hstats = meshops.highlight_stats(mesh, params)
        mesh = meshops.highlight_blind_spots(mesh, params)
        report["highlight"] = {
            "highlighted": int(np.sum(mesh.highlight)),
            "mean_density": hstats.mean_density,
            "threshold": hstats.threshold,
        }
    return filtered, mesh


def run_pipeline(
    source: Source,
    config: Optional[PipelineConfig] = None,
    out_dir: Optional[Union[str, Path]] = None,
    regions: Optional[list[scene.Box]] = None,
) -> PipelineResult:
    """Run every stage on a cloud, scene spec, or PLY path.

    ``regions`` supplies ground-truth blind boxes for an externally loaded
    cloud; a SceneSpec brings its own. When ``out_dir`` is given, writes
    mesh.ply, simplified.ply, and report.json there.
    """
    config = config or PipelineConfig()
    timings = _Timings()
    report: dict = {"schema": REPORT_SCHEMA}

    with timings.stage("load"):
        if isinstance(source, scene.SceneSpec):
            cloud, regions = scene.generate_room_scan(source)
            report["input"] = {"kind": "scene", **scene.spec_to_dict(source)}
        elif isinstance(source, PointCloud):
            cloud = source
            report["input"] = {"kind": "cloud"}
        else:
            path = Path(source)
            if not path.exists():
                raise FileNotFoundError(f"input cloud not found: {path}")
            cloud = ply.load_point_cloud(path)
            report["input"] = {"kind": "file", "path": str(path)}
        report["input"]["points"] = len(cloud)

    filtered, mesh = build_highlighted_mesh(cloud, config, timings, report)

    with timings.stage("evaluate"):
        report["detection"] = evaluate_detection(
            mesh,
            filtered,
            percentile=config.eval.percentile,
            map_radius=config.eval.map_radius,
            density_radius=config.density.radius,
            regions=regions,
        )

    with timings.stage("simplify"):
        simplified = simplify_mesh(mesh, config.simplify.target_vertices)
        report["simplify"] = {
            "target": config.simplify.target_vertices,
            "vertices": simplified.vertex_count,
            "triangles": simplified.triangle_count,
        }

    result = PipelineResult(mesh=mesh, simplified=simplified, report=report)
    if out_dir is not None:
        with timings.stage("write"):
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            result.mesh_path = out / "mesh.ply"
            result.simplified_path = out / "simplified.ply"
            result.report_path = out / "report.json"
            ply.save_mesh(mesh, result.mesh_path)
            ply.save_mesh(simplified, result.simplified_path)

    report["timings_ms"] = {k: round(v, 3) for k, v in timings.ms.items()}
    if result.report_path is not None:
        result.report_path.write_text(report_json(report), encoding="utf-8")
    return result


def evaluate_detection(
    mesh: TriangleMesh,
    cloud: PointCloud,
    *,
    percentile: float,
    map_radius: float,
    density_radius: float,
    regions: Optional[list[scene.Box]] = None,
) -> dict:
    """Score mapped blind spots against both ground-truth modes.

    "low_density": G = cloud points below the density percentile cut.
    "boxes": G = cloud points within map_radius of a planted blind region
    (only when regions are known).
    """
    mapped = blindspot.map_blind_spots(mesh, cloud, map_radius)
    profile = blindspot.estimate_point_density(cloud, density_radius)
    truth = blindspot.identify_low_density(profile, percentile)
    out = {
        "mapped_points": int(np.unique(mapped.indices).size),
        "low_density": blindspot.detection_metrics(mapped, truth).to_dict(),
        "boxes": None,
    }
    if regions is not None:
        box_indices = blindspot.ground_truth_from_boxes(cloud, regions, collar=map_radius)
        m = np.unique(np.asarray(mapped.indices, dtype=np.int64))
        tp = int(np.intersect1d(m, box_indices, assume_unique=True).size)
        out["boxes"] = blindspot.detection_metrics_from_counts(
            tp, int(m.size) - tp, int(box_indices.size) - tp
        ).to_dict()
    return out
