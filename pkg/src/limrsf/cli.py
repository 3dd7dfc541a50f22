"""Command-line front end; a thin client over the typed operation layer.

Each subcommand marshals its flags into the same request models the HTTP
service consumes and prints the response as JSON. Exit codes: 1 for usage
and validation problems, 2 for I/O problems (missing or malformed files),
3 for numeric failures inside the solver or reconstruction.
"""

from __future__ import annotations

import json
import sys
import threading
from pathlib import Path
from typing import Optional

import click
import pydantic

from . import ply
from .config import ConfigError
from .errors import (
    ImageFormatError,
    PipelineStageError,
    PlyError,
    ProtocolError,
    ReconstructionError,
    SolverError,
)
from .service import create_app
from .service import models, ops
from .stream import MeshStreamServer, resolve_bind_host, watch_and_republish

DEFAULT_REST_PORT = 9402

# pinned flag name -> dotted config key
_OVERRIDE_FLAGS = {
    "depth": "poisson.depth",
    "density_radius": "density.radius",
    "density_threshold": "highlight.density_threshold",
    "target_vertices": "simplify.target_vertices",
}


def _overrides(sets: tuple[str, ...], **flags) -> dict:
    """Collect --set pairs and pinned flags into a dotted-key mapping."""
    out: dict = {}
    for item in sets:
        key, eq, value = item.partition("=")
        if not eq:
            raise click.UsageError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    for flag, key in _OVERRIDE_FLAGS.items():
        if flags.get(flag) is not None:
            out[key] = flags[flag]
    return out


def _emit(model: pydantic.BaseModel) -> None:
    click.echo(model.model_dump_json(indent=2))


def config_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(), default=None,
                      help="Config file; explicit flags override it.")(fn)
    fn = click.option("--set", "sets", multiple=True, metavar="KEY=VALUE",
                      help="Override any config key, e.g. --set normals.radius=0.4.")(fn)
    return fn


def scene_options(fn):
    fn = click.option("--scene", "scene_name", type=click.Choice(["default", "plain"]),
                      default="default", show_default=True,
                      help="'default' plants a 1 m x 1 m wall hole; 'plain' has none.")(fn)
    fn = click.option("--room", nargs=3, type=float, default=None, help="Room W D H in meters.")(fn)
    fn = click.option("--spacing", type=float, default=None, help="Grid spacing in meters.")(fn)
    fn = click.option("--noise-sigma", type=float, default=None, help="Gaussian noise sigma.")(fn)
    fn = click.option("--outliers", type=int, default=None, help="Count of far stray points.")(fn)
    fn = click.option("--seed", type=int, default=0, show_default=True)(fn)
    fn = click.option("--hole", "holes", nargs=6, type=float, multiple=True,
                      metavar="X0 Y0 Z0 X1 Y1 Z1", help="Extra hole box; repeatable.")(fn)
    return fn


def _scene_model(scene_name, room, spacing, noise_sigma, outliers, seed, holes) -> models.SceneModel:
    base = models.SceneModel.default_scene(seed) if scene_name == "default" else models.SceneModel(seed=seed)
    updates: dict = {}
    if room is not None:
        updates["room"] = tuple(room)
    if spacing is not None:
        updates["spacing"] = spacing
    if noise_sigma is not None:
        updates["noise_sigma"] = noise_sigma
    if outliers is not None:
        updates["outliers"] = outliers
    if holes:
        updates["holes"] = base.holes + [(tuple(h[:3]), tuple(h[3:])) for h in holes]
    return base.model_copy(update=updates)


@click.group()
@click.version_option(package_name="limrsf")
def cli():
    """Point-cloud to highlighted-mesh pipeline with streaming and metrics."""


@cli.command("scan-gen")
@scene_options
@click.option("--out", "out_path", type=click.Path(), required=True, help="Output cloud PLY.")
@click.option("--regions", "regions_path", type=click.Path(), default=None,
              help="Also write the ground-truth blind regions as JSON.")
def scan_gen(scene_name, room, spacing, noise_sigma, outliers, seed, holes, out_path, regions_path):
    """Generate a synthetic room scan with planted blind spots."""
    scene_model = _scene_model(scene_name, room, spacing, noise_sigma, outliers, seed, holes)
    _emit(ops.scan(models.ScanRequest(scene=scene_model, out_path=out_path,
                                      regions_path=regions_path)))


@cli.command()
@config_options
@click.option("--input", "input_path", type=click.Path(), required=True, help="Input cloud PLY.")
@click.option("--out", "out_path", type=click.Path(), required=True, help="Output mesh PLY.")
@click.option("--depth", type=int, default=None, help="Reconstruction grid depth (3..9).")
@click.option("--density-radius", type=float, default=None, help="Vertex density ball radius.")
@click.option("--density-threshold", type=float, default=None, help="Highlight cut multiplier.")
def reconstruct(config_path, sets, input_path, out_path, depth, density_radius, density_threshold):
    """Filter, estimate normals, reconstruct, color, and highlight."""
    overrides = _overrides(sets, depth=depth, density_radius=density_radius,
                           density_threshold=density_threshold)
    _emit(ops.reconstruct(models.ReconstructRequest(
        input_path=input_path, out_path=out_path, config_path=config_path, overrides=overrides)))


@cli.command()
@click.option("--input", "input_path", type=click.Path(), required=True, help="Input mesh PLY.")
@click.option("--out", "out_path", type=click.Path(), required=True, help="Output mesh PLY.")
@click.option("--target-vertices", type=int, default=10000, show_default=True)
def simplify(input_path, out_path, target_vertices):
    """Reduce a mesh to a vertex budget by quadric edge collapse."""
    _emit(ops.simplify(models.SimplifyRequest(
        input_path=input_path, out_path=out_path, target_vertices=target_vertices)))


@cli.command()
@click.option("--mesh", "mesh_path", type=click.Path(), required=True, help="Highlighted mesh PLY.")
@click.option("--cloud", "cloud_path", type=click.Path(), required=True, help="Reference cloud PLY.")
@click.option("--regions", "regions_path", type=click.Path(), default=None,
              help="Blind-region boxes JSON for the second ground-truth mode.")
@click.option("--percentile", type=float, default=60.0, show_default=True)
@click.option("--map-radius", type=float, default=0.5, show_default=True)
@click.option("--density-radius", type=float, default=0.15, show_default=True)
def detect(mesh_path, cloud_path, regions_path, percentile, map_radius, density_radius):
    """Map highlighted vertices back to cloud points and score the detection."""
    _emit(ops.detect(models.DetectRequest(
        mesh_path=mesh_path, cloud_path=cloud_path, regions_path=regions_path,
        percentile=percentile, map_radius=map_radius, density_radius=density_radius)))


@cli.command("eval-blindspots")
@click.option("--counts", "counts_path", type=click.Path(), default=None,
              help='JSON file with {"tp": ..., "fp": ..., "fn": ...}.')
@click.option("--tp", type=int, default=None)
@click.option("--fp", type=int, default=None)
@click.option("--fn", type=int, default=None)
def eval_blindspots(counts_path, tp, fp, fn):
    """Confusion metrics (precision/recall/F1/IoU) from raw counts."""
    if counts_path is not None:
        if (tp, fp, fn) != (None, None, None):
            raise click.UsageError("--counts and --tp/--fp/--fn are mutually exclusive")
        data = json.loads(Path(counts_path).read_text(encoding="utf-8"))
        request = models.EvalBlindspotsRequest(**data)
    elif None in (tp, fp, fn):
        raise click.UsageError("provide --counts FILE or all of --tp/--fp/--fn")
    else:
        request = models.EvalBlindspotsRequest(tp=tp, fp=fp, fn=fn)
    _emit(ops.eval_blindspots(request))


@cli.command("eval-images")
@click.option("--reference", "reference_path", type=click.Path(), required=True,
              help="Reference image (PGM/PPM).")
@click.option("--test", "test_path", type=click.Path(), required=True,
              help="Image under test (PGM/PPM).")
def eval_images(reference_path, test_path):
    """MSE, PSNR, and SSIM between two images."""
    _emit(ops.eval_images(models.EvalImagesRequest(
        reference_path=reference_path, test_path=test_path)))


def _serve_blocking(mesh_path, config, rest_port: int, watch: bool) -> None:
    import uvicorn

    mesh = ply.load_mesh(mesh_path)
    server = MeshStreamServer(tcp_port=config.serve.tcp_port, ws_port=config.serve.ws_port)
    server.start()
    server.publish(mesh)
    stop = threading.Event()
    if watch:
        threading.Thread(
            target=watch_and_republish, args=(mesh_path, server, stop), daemon=True
        ).start()
    host = resolve_bind_host()
    tcp, ws = server.tcp_address, server.ws_address
    click.echo(f"streaming tcp://{tcp[0]}:{tcp[1]} ws://{ws[0]}:{ws[1]} rest http://{host}:{rest_port}")
    try:
        uvicorn.run(
            create_app(config, stream_server=server),
            host=host, port=rest_port, log_level="warning",
        )
    finally:
        stop.set()
        server.stop()


@cli.command()
@config_options
@click.option("--mesh", "mesh_path", type=click.Path(), required=True, help="Mesh PLY to publish.")
@click.option("--rest-port", type=int, default=DEFAULT_REST_PORT, show_default=True)
@click.option("--watch/--no-watch", default=True, show_default=True,
              help="Republish when the mesh file changes.")
def serve(config_path, sets, mesh_path, rest_port, watch):
    """Publish a mesh on raw TCP + WebSocket and expose the HTTP API; blocks."""
    config = ops.resolve_config(config_path, _overrides(sets))
    _serve_blocking(mesh_path, config, rest_port, watch)


@cli.command()
@config_options
@scene_options
@click.option("--input", "input_path", type=click.Path(), default=None,
              help="Input cloud PLY (instead of a synthetic scene).")
@click.option("--regions", "regions_path", type=click.Path(), default=None,
              help="Blind-region boxes JSON accompanying --input.")
@click.option("--out", "out_dir", type=click.Path(), required=True, help="Output directory.")
@click.option("--depth", type=int, default=None, help="Reconstruction grid depth (3..9).")
@click.option("--density-radius", type=float, default=None, help="Vertex density ball radius.")
@click.option("--density-threshold", type=float, default=None, help="Highlight cut multiplier.")
@click.option("--target-vertices", type=int, default=None, help="Simplification vertex budget.")
@click.option("--serve", "serve_after", is_flag=True, default=False,
              help="After the run, publish the simplified mesh and block.")
@click.option("--rest-port", type=int, default=DEFAULT_REST_PORT, show_default=True)
def run(config_path, sets, scene_name, room, spacing, noise_sigma, outliers, seed, holes,
        input_path, regions_path, out_dir, depth, density_radius, density_threshold,
        target_vertices, serve_after, rest_port):
    """Full pipeline: scan/load, reconstruct, highlight, evaluate, simplify."""
    overrides = _overrides(sets, depth=depth, density_radius=density_radius,
                           density_threshold=density_threshold, target_vertices=target_vertices)
    scene_model = None
    if input_path is None:
        scene_model = _scene_model(scene_name, room, spacing, noise_sigma, outliers, seed, holes)
    response = ops.run(models.RunRequest(
        scene=scene_model, input_path=input_path, regions_path=regions_path,
        out_dir=out_dir, config_path=config_path, overrides=overrides))
    _emit(response)
    if serve_after:
        config = ops.resolve_config(config_path, overrides)
        _serve_blocking(response.simplified_path, config, rest_port, watch=True)


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, PipelineStageError):
        return _exit_code(exc.cause)
    if isinstance(exc, (SolverError, ReconstructionError)):
        return 3
    if isinstance(exc, (OSError, PlyError, ImageFormatError, ProtocolError,
                        json.JSONDecodeError)):
        return 2
    return 1  # usage, validation, config


def main(argv: Optional[list[str]] = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:  # --help / --version
        return exc.exit_code
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except (pydantic.ValidationError, ConfigError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
