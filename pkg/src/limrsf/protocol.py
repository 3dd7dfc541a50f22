"""Binary mesh snapshot encoding and transport framing.

Message layout, all little-endian:

    u16 version (currently 1)
    u16 flags (bit 0: per-vertex densities appended)
    u32 vertex_count
    u32 triangle_count
    f32 x 3 per vertex            positions
    u8  x 4 per vertex            RGBA colors, round(c * 255)
    u32 x 3 per triangle          vertex indices
    f32 per vertex                densities, only when flag bit 0 is set

A raw-TCP stream carries each message inside a frame:

    "LMRF" | u32 payload_length | payload

WebSocket transport sends the bare message per binary WS frame instead (the
socket layer already provides framing there).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    BadMagicError,
    FrameLengthError,
    TrailingDataError,
    TriangleIndexOutOfRangeError,
    TruncatedMessageError,
    UnknownFlagsError,
    UnsupportedVersionError,
    ValidationError,
)
from .mesh import TriangleMesh

MAGIC = b"LMRF"
VERSION = 1
FLAG_DENSITIES = 0x0001
HEADER = struct.Struct("<HHII")
FRAME_PREFIX = struct.Struct("<4sI")
MAX_FRAME_PAYLOAD = 1 << 30


@dataclass
class MeshMessage:
    """Decoded snapshot; array dtypes mirror the wire exactly."""

    version: int
    flags: int
    positions: np.ndarray  # (V, 3) float32
    colors: np.ndarray  # (V, 4) uint8
    triangles: np.ndarray  # (T, 3) uint32
    densities: Optional[np.ndarray] = None  # (V,) float32 iff FLAG_DENSITIES

    @property
    def vertex_count(self) -> int:
        return self.positions.shape[0]

    @property
    def triangle_count(self) -> int:
        return self.triangles.shape[0]

    def to_mesh(self) -> TriangleMesh:
        return TriangleMesh(
            vertices=self.positions.astype(np.float64),
            triangles=self.triangles.astype(np.int64),
            vertex_colors=self.colors.astype(np.float64) / 255.0,
            vertex_density=None
            if self.densities is None
            else self.densities.astype(np.float64),
        )


def encode_mesh(mesh: TriangleMesh) -> bytes:
    """Serialize a mesh snapshot; colors are required, densities optional."""
    if mesh.vertex_colors is None:
        raise ValidationError("encoding requires vertex colors")
    v = mesh.vertex_count
    t = mesh.triangle_count
    if v >= 1 << 32 or t >= 1 << 32:
        raise ValidationError(f"counts {v}/{t} overflow the u32 wire fields")
    if mesh.triangles.size and mesh.triangles.max() >= 1 << 32:
        raise ValidationError("triangle index overflows u32")

    flags = FLAG_DENSITIES if mesh.vertex_density is not None else 0
    parts = [
        HEADER.pack(VERSION, flags, v, t),
        mesh.vertices.astype("<f4").tobytes(),
        np.rint(mesh.vertex_colors * 255.0).astype(np.uint8).tobytes(),
        mesh.triangles.astype("<u4").tobytes(),
    ]
    if mesh.vertex_density is not None:
        parts.append(mesh.vertex_density.astype("<f4").tobytes())
    return b"".join(parts)


def decode_mesh(data: bytes) -> MeshMessage:
    """Parse and validate a snapshot; never reads past declared lengths."""
    if len(data) < HEADER.size:
        raise TruncatedMessageError(
            "message header incomplete", expected=HEADER.size, actual=len(data), offset=len(data)
        )
    version, flags, v, t = HEADER.unpack_from(data, 0)
    if version != VERSION:
        raise UnsupportedVersionError(f"version {version}, decoder speaks {VERSION}", offset=0)
    if flags & ~FLAG_DENSITIES:
        raise UnknownFlagsError(f"undefined flag bits 0x{flags & ~FLAG_DENSITIES:04x}", offset=2)

    with_densities = bool(flags & FLAG_DENSITIES)
    expected = HEADER.size + 12 * v + 4 * v + 12 * t + (4 * v if with_densities else 0)
    if len(data) < expected:
        raise TruncatedMessageError(
            "message body incomplete", expected=expected, actual=len(data), offset=len(data)
        )
    if len(data) > expected:
        raise TrailingDataError(
            f"{len(data) - expected} bytes past the declared payload", offset=expected
        )

    offset = HEADER.size
    positions = np.frombuffer(data, dtype="<f4", count=3 * v, offset=offset).reshape(v, 3)
    offset += 12 * v
    colors = np.frombuffer(data, dtype=np.uint8, count=4 * v, offset=offset).reshape(v, 4)
    offset += 4 * v
    triangles_off = offset
    triangles = np.frombuffer(data, dtype="<u4", count=3 * t, offset=offset).reshape(t, 3)
    offset += 12 * t
    densities = None
    if with_densities:
        densities = np.frombuffer(data, dtype="<f4", count=v, offset=offset)

    if triangles.size:
        flat = triangles.reshape(-1)
        bad = flat >= v
        if bad.any():
            first = int(np.flatnonzero(bad)[0])
            raise TriangleIndexOutOfRangeError(
                index=int(flat[first]), vertex_count=v, offset=triangles_off + 4 * first
            )
    return MeshMessage(
        version=version,
        flags=flags,
        positions=positions,
        colors=colors,
        triangles=triangles,
        densities=densities,
    )


def encode_frame(payload: bytes) -> bytes:
    if len(payload) > MAX_FRAME_PAYLOAD:
        raise FrameLengthError(f"payload of {len(payload)} bytes exceeds the frame cap", offset=4)
    return FRAME_PREFIX.pack(MAGIC, len(payload)) + payload


class FrameDecoder:
    """Incremental frame parser for a byte stream arriving in arbitrary chunks.

    Feed it bytes, iterate complete payloads. Errors carry the absolute
    stream offset at which the violation was found.
    """

    def __init__(self):
        self._buf = bytearray()
        self._consumed = 0  # absolute offset of the start of _buf

    def feed(self, data: bytes) -> list[bytes]:
        self._buf.extend(data)
        out = []
        while True:
            if len(self._buf) < FRAME_PREFIX.size:
                break
            magic, length = FRAME_PREFIX.unpack_from(self._buf, 0)
            if magic != MAGIC:
                bad = next(
                    i for i in range(4) if self._buf[i : i + 1] != MAGIC[i : i + 1]
                )
                raise BadMagicError(
                    f"expected {MAGIC!r}, got {bytes(self._buf[:4])!r}",
                    offset=self._consumed + bad,
                )
            if length > MAX_FRAME_PAYLOAD:
                raise FrameLengthError(
                    f"declared payload of {length} bytes exceeds the frame cap",
                    offset=self._consumed + 4,
                )
            total = FRAME_PREFIX.size + length
            if len(self._buf) < total:
                break
            out.append(bytes(self._buf[FRAME_PREFIX.size : total]))
            del self._buf[:total]
            self._consumed += total
        return out

    @property
    def pending_bytes(self) -> int:
        return len(self._buf)
