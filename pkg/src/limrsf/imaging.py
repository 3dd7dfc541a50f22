"""Grayscale/RGB image loading (netpbm) and MSE / PSNR / SSIM metrics.

Pixels are normalized to [0, 1], so the PSNR peak is fixed at 1.0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import ImageFormatError, ValidationError


@dataclass
class Image:
    """Row-major pixel grid; ``pixels`` is (H, W) or (H, W, 3) float64 in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim == 3 and self.pixels.shape[2] == 1:
            self.pixels = self.pixels[:, :, 0]
        if self.pixels.ndim not in (2, 3) or (
            self.pixels.ndim == 3 and self.pixels.shape[2] != 3
        ):
            raise ValidationError(f"pixels must be (H, W) or (H, W, 3), got {self.pixels.shape}")
        if self.pixels.size == 0:
            raise ValidationError("image is empty")
        if self.pixels.min() < 0.0 or self.pixels.max() > 1.0:
            raise ValidationError("pixel values must lie in [0, 1]")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3


def _tokenize_header(data: bytes, want: int):
    """Yield ``want`` whitespace-separated header tokens, honoring # comments.

    Returns (tokens, offset just past the single whitespace byte that
    terminates the last token).
    """
    tokens = []
    pos = 2  # past the magic
    while len(tokens) < want:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            eol = data.find(b"\n", pos)
            if eol < 0:
                raise ImageFormatError("unterminated comment in header", offset=pos)
            pos = eol + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ImageFormatError("header ended before width/height/maxval", offset=pos)
        tokens.append((data[start:pos], start))
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise ImageFormatError("missing whitespace after maxval", offset=pos)
    return tokens, pos + 1


def load_image(path) -> Image:
    """Read a P2/P3/P5/P6 netpbm file with maxval 255."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise ImageFormatError(f"bad magic {magic!r}; expected P2, P3, P5, or P6", offset=0)
    channels = 3 if magic in (b"P3", b"P6") else 1
    binary = magic in (b"P5", b"P6")

    tokens, raster_start = _tokenize_header(data, 3)
    values = []
    for (tok, off), name in zip(tokens, ("width", "height", "maxval")):
        try:
            v = int(tok)
        except ValueError:
            raise ImageFormatError(f"bad {name} {tok!r}", offset=off) from None
        values.append(v)
    width, height, maxval = values
    if width < 1 or height < 1:
        raise ImageFormatError(f"image dimensions must be positive, got {width}x{height}", offset=tokens[0][1])
    if maxval != 255:
        raise ImageFormatError(f"only maxval 255 is supported, got {maxval}", offset=tokens[2][1])

    count = width * height * channels
    if binary:
        raster = data[raster_start:]
        if len(raster) != count:
            raise ImageFormatError(
                f"raster holds {len(raster)} bytes, expected exactly {count}",
                offset=raster_start + min(len(raster), count),
            )
        flat = np.frombuffer(raster, dtype=np.uint8).astype(np.float64)
    else:
        lines = data[raster_start:].split(b"\n")
        toks = b" ".join(line.split(b"#", 1)[0] for line in lines).split()
        if len(toks) != count:
            raise ImageFormatError(
                f"raster holds {len(toks)} samples, expected exactly {count}",
                offset=raster_start,
            )
        try:
            flat = np.array([int(t) for t in toks], dtype=np.float64)
        except ValueError:
            raise ImageFormatError("non-integer sample in ascii raster", offset=raster_start) from None
        if flat.size and (flat.min() < 0 or flat.max() > 255):
            raise ImageFormatError("sample out of range [0, 255]", offset=raster_start)

    pixels = flat.reshape((height, width) if channels == 1 else (height, width, 3)) / 255.0
    return Image(pixels=pixels)


def to_gray(img: Image) -> Image:
    """Rec. 601 luma; 1-channel input is returned unchanged."""
    if img.channels == 1:
        return img
    p = img.pixels
    return Image(pixels=0.299 * p[:, :, 0] + 0.587 * p[:, :, 1] + 0.114 * p[:, :, 2])


def _check_same_shape(i1: Image, i2: Image):
    if i1.pixels.shape != i2.pixels.shape:
        raise ValidationError(
            f"image shapes differ: {i1.pixels.shape} vs {i2.pixels.shape}"
        )


def mse(i1: Image, i2: Image) -> float:
    """Mean squared pixel difference."""
    _check_same_shape(i1, i2)
    diff = i1.pixels - i2.pixels
    return float(np.mean(diff**2))


def psnr(i1: Image, i2: Image) -> float:
    """10*log10(1/MSE) with peak 1.0; identical images give +infinity."""
    err = mse(i1, i2)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / err)


@dataclass
class SsimParams:
    """SSIM stabilization constants and evaluation mode.

    ``global`` evaluates the index once from whole-image statistics;
    ``windowed`` averages the index over Gaussian-weighted 11x11 windows
    (sigma 1.5) on the fully-covered interior.
    """

    k1: float = 0.01
    k2: float = 0.03
    mode: str = "windowed"
    window_size: int = 11
    sigma: float = 1.5

    def __post_init__(self):
        if self.mode not in ("global", "windowed"):
            raise ValidationError(f"mode must be 'global' or 'windowed', got {self.mode!r}")
        if not (self.k1 > 0.0 and self.k2 > 0.0):
            raise ValidationError("k1 and k2 must be positive")
        if self.window_size % 2 != 1 or self.window_size < 3:
            raise ValidationError(f"window_size must be an odd integer >= 3, got {self.window_size!r}")
        if not (self.sigma > 0.0):
            raise ValidationError(f"sigma must be positive, got {self.sigma!r}")

    @property
    def c1(self) -> float:
        return (self.k1 * 1.0) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * 1.0) ** 2


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    half = size // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2.0 * sigma * sigma))
    return k / k.sum()


def _ssim_terms(mu1, mu2, m11, m22, m12, c1, c2):
    s11 = m11 - mu1 * mu1
    s22 = m22 - mu2 * mu2
    s12 = m12 - mu1 * mu2
    num = (2.0 * mu1 * mu2 + c1) * (2.0 * s12 + c2)
    den = (mu1 * mu1 + mu2 * mu2 + c1) * (s11 + s22 + c2)
    return num / den


def ssim(i1: Image, i2: Image, params: SsimParams | None = None) -> float:
    """Structural similarity between two grayscale images; result in [-1, 1]."""
    params = params or SsimParams()
    _check_same_shape(i1, i2)
    if i1.channels != 1:
        raise ValidationError("ssim expects grayscale images; convert with to_gray first")
    p1 = i1.pixels
    p2 = i2.pixels

    if params.mode == "global":
        value = _ssim_terms(
            p1.mean(), p2.mean(),
            (p1 * p1).mean(), (p2 * p2).mean(), (p1 * p2).mean(),
            params.c1, params.c2,
        )
        return float(min(1.0, max(-1.0, value)))

    half = params.window_size // 2
    if p1.shape[0] < params.window_size or p1.shape[1] < params.window_size:
        raise ValidationError(
            f"windowed ssim needs images at least {params.window_size} pixels on each side, "
            f"got {p1.shape[1]}x{p1.shape[0]}"
        )
    kernel = _gaussian_kernel(params.window_size, params.sigma)

    def smooth(a):
        out = correlate1d(a, kernel, axis=0, mode="constant")
        out = correlate1d(out, kernel, axis=1, mode="constant")
        return out[half:-half, half:-half]  # fully-covered interior only

    value_map = _ssim_terms(
        smooth(p1), smooth(p2),
        smooth(p1 * p1), smooth(p2 * p2), smooth(p1 * p2),
        params.c1, params.c2,
    )
    return float(min(1.0, max(-1.0, float(value_map.mean()))))
