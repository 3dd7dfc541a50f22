"""HTTP front end: one endpoint per operation handler, plus stream control.

POST /publish pushes a mesh file to the broadcast server (started lazily
on first publish unless an externally managed server was passed in), so a
long-running service can feed viewers without restarting.
"""

from __future__ import annotations

import threading
from contextlib import asynccontextmanager
from typing import Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__, ply
from ..config import PipelineConfig
from ..errors import ConfigError, LimrsfError, PipelineStageError, ReconstructionError, SolverError, ValidationError
from ..protocol import encode_mesh
from ..stream import MeshStreamServer
from . import models, ops


def _status_for(exc: BaseException) -> int:
    if isinstance(exc, PipelineStageError):
        return _status_for(exc.cause)
    if isinstance(exc, FileNotFoundError):
        return 404
    if isinstance(exc, (SolverError, ReconstructionError)):
        return 500
    if isinstance(exc, (LimrsfError, ValidationError, ConfigError)):
        return 422
    if isinstance(exc, OSError):
        return 400
    return 500


def create_app(
    config: Optional[PipelineConfig] = None,
    stream_server: Optional[MeshStreamServer] = None,
) -> FastAPI:
    config = config or PipelineConfig()
    owns_stream = stream_server is None
    state_lock = threading.Lock()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        if owns_stream and app.state.stream is not None:
            app.state.stream.stop()

    app = FastAPI(title="limrsf", version=__version__, lifespan=lifespan)
    app.state.stream = stream_server
    app.state.config = config

    def _stream(start: bool) -> Optional[MeshStreamServer]:
        with state_lock:
            if app.state.stream is None and start:
                server = MeshStreamServer(
                    tcp_port=config.serve.tcp_port, ws_port=config.serve.ws_port
                )
                server.start()
                app.state.stream = server
            return app.state.stream

    @app.exception_handler(LimrsfError)
    async def _limrsf_error(request, exc: LimrsfError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    @app.exception_handler(OSError)
    async def _os_error(request, exc: OSError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.get("/status", response_model=models.StatusResponse)
    def status() -> models.StatusResponse:
        server = _stream(start=False)
        if server is None:
            stream_status = models.StreamStatusModel(running=False)
        else:
            stream_status = models.StreamStatusModel(
                running=True,
                tcp_port=server.tcp_address[1],
                ws_port=server.ws_address[1],
                clients=server.client_count,
                snapshots=server.snapshot_count,
            )
        return models.StatusResponse(name="limrsf", version=__version__, stream=stream_status)

    @app.post("/scan", response_model=models.ScanResponse)
    def scan(req: models.ScanRequest) -> models.ScanResponse:
        return ops.scan(req)

    @app.post("/run", response_model=models.RunResponse)
    def run(req: models.RunRequest) -> models.RunResponse:
        return ops.run(req)

    @app.post("/reconstruct", response_model=models.ReconstructResponse)
    def reconstruct(req: models.ReconstructRequest) -> models.ReconstructResponse:
        return ops.reconstruct(req)

    @app.post("/simplify", response_model=models.SimplifyResponse)
    def simplify(req: models.SimplifyRequest) -> models.SimplifyResponse:
        return ops.simplify(req)

    @app.post("/detect", response_model=models.DetectResponse)
    def detect(req: models.DetectRequest) -> models.DetectResponse:
        return ops.detect(req)

    @app.post("/eval/blindspots", response_model=models.DetectionMetricsModel)
    def eval_blindspots(req: models.EvalBlindspotsRequest) -> models.DetectionMetricsModel:
        return ops.eval_blindspots(req)

    @app.post("/eval/images", response_model=models.ImageMetricsResponse)
    def eval_images(req: models.EvalImagesRequest) -> models.ImageMetricsResponse:
        return ops.eval_images(req)

    @app.post("/publish", response_model=models.PublishResponse)
    def publish(req: models.PublishRequest) -> models.PublishResponse:
        mesh = ply.load_mesh(req.mesh_path)
        payload = encode_mesh(mesh)
        snapshot = _stream(start=True).publish(payload)
        return models.PublishResponse(
            vertices=mesh.vertex_count,
            triangles=mesh.triangle_count,
            payload_bytes=len(payload),
            snapshot=snapshot,
        )

    return app
