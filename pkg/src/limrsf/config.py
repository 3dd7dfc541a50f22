"""Pipeline configuration: typed defaults plus a flat dotted-key text format.

The file format is one `section.key = value` assignment per line, with
blank lines and full-line `#` comments allowed. Unknown keys, duplicate
keys, and out-of-range values are hard errors carrying the line number;
a silent typo here would quietly change an experiment. `emit_config`
produces text that parses back to an equal config.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Union

from .errors import ConfigError

Viewpoint = Union[str, tuple[float, float, float]]  # "auto" or explicit origin


@dataclass(frozen=True)
class OutlierConfig:
    k: int = 20
    std_ratio: float = 2.0


@dataclass(frozen=True)
class NormalsConfig:
    radius: float = 0.5
    viewpoint: Viewpoint = "auto"


@dataclass(frozen=True)
class PoissonConfig:
    depth: int = 6
    smoothing_radius: float = 2.0
    iso_offset: float = 0.0


@dataclass(frozen=True)
class DensityConfig:
    radius: float = 0.15


@dataclass(frozen=True)
class HighlightConfig:
    density_threshold: float = 0.3
    base_alpha: float = 0.5
    highlight_alpha: float = 0.35


@dataclass(frozen=True)
class SimplifyConfig:
    target_vertices: int = 10000


@dataclass(frozen=True)
class EvalConfig:
    percentile: float = 60.0
    map_radius: float = 0.5


@dataclass(frozen=True)
class ServeConfig:
    tcp_port: int = 9400
    ws_port: int = 9401


@dataclass(frozen=True)
class PipelineConfig:
    outlier: OutlierConfig = field(default_factory=OutlierConfig)
    normals: NormalsConfig = field(default_factory=NormalsConfig)
    poisson: PoissonConfig = field(default_factory=PoissonConfig)
    density: DensityConfig = field(default_factory=DensityConfig)
    highlight: HighlightConfig = field(default_factory=HighlightConfig)
    simplify: SimplifyConfig = field(default_factory=SimplifyConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    serve: ServeConfig = field(default_factory=ServeConfig)


def _parse_int(text: str) -> int:
    try:
        return int(text, 10)
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}") from None


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}") from None


def _parse_viewpoint(text: str) -> Viewpoint:
    if text == "auto":
        return "auto"
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ConfigError(f"viewpoint must be 'auto' or three comma-separated numbers, got {text!r}")
    return tuple(_parse_float(p) for p in parts)


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


_VALIDATORS = {
    "outlier.k": lambda v: _check(v >= 1, f"outlier.k must be >= 1, got {v}"),
    "outlier.std_ratio": lambda v: _check(v >= 0.0, f"outlier.std_ratio must be >= 0, got {v}"),
    "normals.radius": lambda v: _check(v > 0.0, f"normals.radius must be positive, got {v}"),
    "normals.viewpoint": lambda v: None,
    "poisson.depth": lambda v: _check(3 <= v <= 9, f"poisson.depth must lie in [3, 9], got {v}"),
    "poisson.smoothing_radius": lambda v: _check(
        v > 0.0, f"poisson.smoothing_radius must be positive, got {v}"
    ),
    "poisson.iso_offset": lambda v: None,
    "density.radius": lambda v: _check(v > 0.0, f"density.radius must be positive, got {v}"),
    "highlight.density_threshold": lambda v: _check(
        v > 0.0, f"highlight.density_threshold must be positive, got {v}"
    ),
    "highlight.base_alpha": lambda v: _check(
        0.0 <= v <= 1.0, f"highlight.base_alpha must lie in [0, 1], got {v}"
    ),
    "highlight.highlight_alpha": lambda v: _check(
        0.0 <= v <= 1.0, f"highlight.highlight_alpha must lie in [0, 1], got {v}"
    ),
    "simplify.target_vertices": lambda v: _check(
        v >= 4, f"simplify.target_vertices must be >= 4, got {v}"
    ),
    "eval.percentile": lambda v: _check(
        0.0 < v < 100.0, f"eval.percentile must lie strictly in (0, 100), got {v}"
    ),
    "eval.map_radius": lambda v: _check(v > 0.0, f"eval.map_radius must be positive, got {v}"),
    "serve.tcp_port": lambda v: _check(1 <= v <= 65535, f"serve.tcp_port out of range: {v}"),
    "serve.ws_port": lambda v: _check(1 <= v <= 65535, f"serve.ws_port out of range: {v}"),
}

_PARSERS = {
    "outlier.k": _parse_int,
    "outlier.std_ratio": _parse_float,
    "normals.radius": _parse_float,
    "normals.viewpoint": _parse_viewpoint,
    "poisson.depth": _parse_int,
    "poisson.smoothing_radius": _parse_float,
    "poisson.iso_offset": _parse_float,
    "density.radius": _parse_float,
    "highlight.density_threshold": _parse_float,
    "highlight.base_alpha": _parse_float,
    "highlight.highlight_alpha": _parse_float,
    "simplify.target_vertices": _parse_int,
    "eval.percentile": _parse_float,
    "eval.map_radius": _parse_float,
    "serve.tcp_port": _parse_int,
    "serve.ws_port": _parse_int,
}


def set_value(values: dict, key: str, raw, line: int | None = None) -> None:
    """Parse, bounds-check, and store one dotted-key assignment.

    ``raw`` is usually the text right of '='; typed values (from CLI flags
    or request bodies) are accepted and routed through the same parser.
    """
    if key not in _PARSERS:
        raise ConfigError(f"unknown key {key!r}", line=line)
    if not isinstance(raw, str):
        if isinstance(raw, list):
            raw = tuple(raw)
        raw = _format_value(raw)
    try:
        value = _PARSERS[key](raw)
        _VALIDATORS[key](value)
    except ConfigError as exc:
        raise ConfigError(str(exc), line=line) from None
    values[key] = value


def apply_overrides(base: PipelineConfig, overrides: dict) -> PipelineConfig:
    """A copy of ``base`` with dotted-key overrides applied and validated."""
    values = config_values(base)
    for key, raw in overrides.items():
        set_value(values, key, raw)
    return _build(values)


def _build(values: dict) -> PipelineConfig:
    sections = {}
    for f in fields(PipelineConfig):
        cls = f.default_factory
        kwargs = {
            sub.name: values[dotted]
            for sub in fields(cls)
            if (dotted := f"{f.name}.{sub.name}") in values
        }
        sections[f.name] = cls(**kwargs)
    return PipelineConfig(**sections)


def parse_config(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    """Apply assignments in ``text`` on top of ``base`` (defaults if omitted)."""
    values: dict = {} if base is None else config_values(base)
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ConfigError(f"expected 'section.key = value', got {line!r}", line=lineno)
        key = key.strip()
        if key in seen:
            raise ConfigError(f"duplicate key {key!r}", line=lineno)
        seen.add(key)
        set_value(values, key, value.strip(), line=lineno)
    return _build(values)


def config_values(config: PipelineConfig) -> dict:
    """Flatten to an ordered {dotted key: value} mapping."""
    out = {}
    for f in fields(PipelineConfig):
        section = getattr(config, f.name)
        for sub in fields(section):
            out[f"{f.name}.{sub.name}"] = getattr(section, sub.name)
    return out


def _format_value(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, bool):
        raise TypeError("no boolean config fields exist")
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_config(config: PipelineConfig) -> str:
    lines = [f"{key} = {_format_value(value)}" for key, value in config_values(config).items()]
    return "\n".join(lines) + "\n"


def load_config(path) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
