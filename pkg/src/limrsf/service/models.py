"""Request/response models shared by the HTTP service and the CLI.

Every operation the tool exposes is a typed request in, typed response
out; the CLI marshals flags into these models and the FastAPI app exposes
them as endpoints, so both fronts validate identically. Numeric config
overrides ride in a flat ``overrides`` mapping of dotted keys and reuse
the config module's parsers and bounds checks.
"""

from __future__ import annotations

from typing import Any, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .. import scene

_DEFAULT_SPEC = scene.SceneSpec()

Corner = tuple[float, float, float]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SceneModel(StrictModel):
    room: Corner = _DEFAULT_SPEC.room
    spacing: float = _DEFAULT_SPEC.spacing
    holes: list[tuple[Corner, Corner]] = Field(default_factory=list)
    noise_sigma: float = _DEFAULT_SPEC.noise_sigma
    outliers: int = _DEFAULT_SPEC.outliers
    seed: int = _DEFAULT_SPEC.seed

    def to_spec(self) -> scene.SceneSpec:
        return scene.SceneSpec(
            room=self.room,
            spacing=self.spacing,
            holes=tuple(scene.Box(lo=lo, hi=hi) for lo, hi in self.holes),
            noise_sigma=self.noise_sigma,
            outliers=self.outliers,
            seed=self.seed,
        )

    @classmethod
    def default_scene(cls, seed: int = 0) -> "SceneModel":
        spec = scene.default_scene(seed)
        return cls(
            room=spec.room,
            spacing=spec.spacing,
            holes=[(b.lo, b.hi) for b in spec.holes],
            noise_sigma=spec.noise_sigma,
            outliers=spec.outliers,
            seed=spec.seed,
        )


class ConfiguredRequest(StrictModel):
    """Base for requests that tweak pipeline parameters."""

    config_path: Optional[str] = None
    overrides: dict[str, Any] = Field(default_factory=dict)


class ScanRequest(StrictModel):
    scene: SceneModel = Field(default_factory=SceneModel)
    out_path: str
    regions_path: Optional[str] = None


class ScanResponse(StrictModel):
    points: int
    out_path: str
    regions: list[tuple[Corner, Corner]]
    regions_path: Optional[str] = None


class RunRequest(ConfiguredRequest):
    scene: Optional[SceneModel] = None
    input_path: Optional[str] = None
    regions_path: Optional[str] = None
    out_dir: str

    @model_validator(mode="after")
    def _one_source(self):
        if (self.scene is None) == (self.input_path is None):
            raise ValueError("exactly one of 'scene' or 'input_path' must be given")
        return self


class DetectionMetricsModel(StrictModel):
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    iou: float


class DetectionBlockModel(StrictModel):
    mapped_points: int
    low_density: DetectionMetricsModel
    boxes: Optional[DetectionMetricsModel] = None


class RunResponse(StrictModel):
    mesh_path: str
    simplified_path: str
    report_path: str
    detection: DetectionBlockModel
    report: dict


class ReconstructRequest(ConfiguredRequest):
    input_path: str
    out_path: str


class ReconstructResponse(StrictModel):
    vertices: int
    triangles: int
    highlighted: int
    out_path: str


class SimplifyRequest(StrictModel):
    input_path: str
    out_path: str
    target_vertices: int = 10000


class SimplifyResponse(StrictModel):
    vertices: int
    triangles: int
    out_path: str


class DetectRequest(StrictModel):
    mesh_path: str
    cloud_path: str
    regions_path: Optional[str] = None
    percentile: float = 60.0
    map_radius: float = 0.5
    density_radius: float = 0.15


class DetectResponse(DetectionBlockModel):
    pass


class EvalBlindspotsRequest(StrictModel):
    tp: int
    fp: int
    fn: int


class EvalImagesRequest(StrictModel):
    reference_path: str
    test_path: str


class ImageMetricsResponse(StrictModel):
    mse: float
    psnr: Union[float, str]  # "inf" when the images are identical
    ssim: float


class PublishRequest(StrictModel):
    mesh_path: str


class PublishResponse(StrictModel):
    vertices: int
    triangles: int
    payload_bytes: int
    snapshot: int


class StreamStatusModel(StrictModel):
    running: bool
    tcp_port: Optional[int] = None
    ws_port: Optional[int] = None
    clients: int = 0
    snapshots: int = 0


class StatusResponse(StrictModel):
    name: str
    version: str
    stream: StreamStatusModel
