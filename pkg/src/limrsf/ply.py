"""Strict PLY I/O for point clouds and highlighted triangle meshes.

Supported subset, exactly:

  cloud vertex properties: float x/y/z, then optional uchar red/green/blue,
  then optional float nx/ny/nz
  mesh vertex properties:  float x/y/z, uchar red/green/blue/alpha,
  float density, uchar highlight; plus one face element with
  'property list uchar int vertex_indices', triangles only

Formats 'ascii 1.0' and 'binary_little_endian 1.0'. Anything else is a named
error carrying the header line or body byte offset. Coordinates are float32
on disk; colors are uchar and map to [0, 1] via c/255.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    PlyCountError,
    PlyHeaderError,
    PlyPropertyError,
    PlyTruncatedError,
    ValidationError,
)
from .geometry import PointCloud
from .mesh import TriangleMesh

_CLOUD_XYZ = [("float", n) for n in ("x", "y", "z")]
_CLOUD_RGB = [("uchar", n) for n in ("red", "green", "blue")]
_CLOUD_NRM = [("float", n) for n in ("nx", "ny", "nz")]
_MESH_VERTEX = (
    _CLOUD_XYZ
    + [("uchar", n) for n in ("red", "green", "blue", "alpha")]
    + [("float", "density"), ("uchar", "highlight")]
)


def _fmt(value) -> str:
    # Shortest decimal that reparses to the same float32.
    return np.format_float_positional(np.float32(value), unique=True, trim="-")


class _Header:
    def __init__(self, fmt, elements, end_offset, line_count):
        self.format = fmt  # "ascii" | "binary_little_endian"
        self.elements = elements  # [(name, count, [(type, prop), ...])]
        self.end_offset = end_offset  # byte offset just past "end_header\n"
        self.line_count = line_count


def _parse_header(data: bytes) -> _Header:
    if not data.startswith(b"ply\n") and not data.startswith(b"ply\r\n"):
        raise PlyHeaderError("file does not start with 'ply'", line=1)
    end = data.find(b"end_header\n")
    if end < 0:
        raise PlyHeaderError("missing 'end_header'", line=data[:4096].count(b"\n") + 1)
    end_offset = end + len(b"end_header\n")
    lines = data[:end].decode("ascii", errors="replace").splitlines()

    fmt = None
    elements = []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("comment"):
            continue
        tokens = line.split()
        if tokens[0] == "format":
            if tokens[1:] not in (["ascii", "1.0"], ["binary_little_endian", "1.0"]):
                raise PlyHeaderError(f"unsupported format {line!r}", line=lineno)
            fmt = tokens[1]
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise PlyHeaderError(f"malformed element line {line!r}", line=lineno)
            try:
                count = int(tokens[2])
            except ValueError:
                raise PlyHeaderError(f"bad element count {tokens[2]!r}", line=lineno) from None
            if count < 0:
                raise PlyHeaderError(f"negative element count {count}", line=lineno)
            elements.append((tokens[1], count, [], lineno))
        elif tokens[0] == "property":
            if not elements:
                raise PlyHeaderError("property before any element", line=lineno)
            if tokens[1] == "list":
                if len(tokens) != 5:
                    raise PlyHeaderError(f"malformed list property {line!r}", line=lineno)
                if tokens[2] != "uchar" or tokens[3] != "int":
                    raise PlyPropertyError(
                        f"unsupported list property types '{tokens[2]} {tokens[3]}'", line=lineno
                    )
                elements[-1][2].append(("list uchar int", tokens[4], lineno))
            else:
                if len(tokens) != 3:
                    raise PlyHeaderError(f"malformed property line {line!r}", line=lineno)
                if tokens[1] not in ("float", "uchar"):
                    raise PlyPropertyError(f"unsupported property type {tokens[1]!r}", line=lineno)
                elements[-1][2].append((tokens[1], tokens[2], lineno))
        else:
            raise PlyHeaderError(f"unrecognized header line {line!r}", line=lineno)
    if fmt is None:
        raise PlyHeaderError("missing 'format' line", line=2)
    cleaned = [(name, count, [(t, p) for t, p, _ in props]) for name, count, props, _ in elements]
    return _Header(fmt, cleaned, end_offset, len(lines) + 1)


def _expect_vertex_schema(header: _Header, variants, what: str):
    if not header.elements or header.elements[0][0] != "vertex":
        raise PlyHeaderError(f"{what} PLY must start with a 'vertex' element", line=2)
    props = header.elements[0][2]
    for variant in variants:
        if props == variant:
            return
    raise PlyPropertyError(
        f"vertex properties {[p for _, p in props]} do not match the supported {what} layout",
        line=2,
    )


def _vertex_dtype(props) -> np.dtype:
    np_types = {"float": "<f4", "uchar": "u1"}
    return np.dtype([(name, np_types[t]) for t, name in props])


def _parse_ascii_rows(data, offset, count, props, first_line):
    text = data[offset:].decode("ascii", errors="replace")
    lines = text.splitlines()
    rows = np.zeros(count, dtype=_vertex_dtype(props))
    consumed = 0
    got = 0
    for i, line in enumerate(lines):
        if got == count:
            break
        tokens = line.split()
        consumed = i + 1
        if not tokens:
            continue
        lineno = first_line + i
        if len(tokens) != len(props):
            raise PlyCountError(
                f"expected {len(props)} values, got {len(tokens)}", line=lineno
            )
        for (typ, name), tok in zip(props, tokens):
            try:
                if typ == "float":
                    rows[name][got] = np.float32(float(tok))
                else:
                    v = int(tok)
                    if not 0 <= v <= 255:
                        raise ValueError
                    rows[name][got] = v
            except ValueError:
                raise PlyCountError(f"bad {typ} value {tok!r}", line=lineno) from None
        got += 1
    if got < count:
        raise PlyTruncatedError(
            "ascii payload ended early", expected=count, actual=got
        )
    return rows, lines[consumed:], first_line + consumed


def _parse_binary_rows(data, offset, count, props):
    dtype = _vertex_dtype(props)
    need = dtype.itemsize * count
    avail = len(data) - offset
    if avail < need:
        raise PlyTruncatedError(
            "binary payload ended early",
            expected=need,
            actual=avail,
            offset=offset + avail,
        )
    rows = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    return rows, offset + need


def load_point_cloud(path) -> PointCloud:
    """Read a cloud PLY; colors and normals come back only if present."""
    with open(path, "rb") as fh:
        data = fh.read()
    header = _parse_header(data)
    variants = [
        _CLOUD_XYZ,
        _CLOUD_XYZ + _CLOUD_RGB,
        _CLOUD_XYZ + _CLOUD_NRM,
        _CLOUD_XYZ + _CLOUD_RGB + _CLOUD_NRM,
    ]
    _expect_vertex_schema(header, variants, "cloud")
    if len(header.elements) != 1:
        raise PlyHeaderError(
            f"cloud PLY must contain only a vertex element, found {header.elements[1][0]!r}",
            line=2,
        )
    _, count, props = header.elements[0]
    names = [p for _, p in props]

    if header.format == "ascii":
        rows, rest, lineno = _parse_ascii_rows(data, header.end_offset, count, props, header.line_count)
        if any(line.split() for line in rest):
            raise PlyCountError("trailing data after declared vertices", line=lineno)
    else:
        rows, offset = _parse_binary_rows(data, header.end_offset, count, props)
        if offset != len(data):
            raise PlyTruncatedError(
                "trailing bytes after declared vertices",
                expected=offset - header.end_offset,
                actual=len(data) - header.end_offset,
                offset=offset,
            )

    points = np.stack(
        [rows["x"], rows["y"], rows["z"]], axis=1
    ).astype(np.float64) if count else np.zeros((0, 3))
    colors = None
    if "red" in names:
        colors = np.stack([rows["red"], rows["green"], rows["blue"]], axis=1) / 255.0 \
            if count else np.zeros((0, 3))
    normals = None
    if "nx" in names:
        normals = np.stack(
            [rows["nx"], rows["ny"], rows["nz"]], axis=1
        ).astype(np.float64) if count else np.zeros((0, 3))
    return PointCloud(points=points, colors=colors, normals=normals)


def save_point_cloud(cloud: PointCloud, path, fmt: str = "binary_little_endian") -> None:
    """Write a cloud PLY; reloading a binary file reproduces it bit for bit."""
    if fmt not in ("ascii", "binary_little_endian"):
        raise ValidationError(f"unsupported PLY format {fmt!r}")
    props = list(_CLOUD_XYZ)
    if cloud.colors is not None:
        props += _CLOUD_RGB
    if cloud.normals is not None:
        props += _CLOUD_NRM

    n = len(cloud)
    header = ["ply", f"format {fmt} 1.0", f"element vertex {n}"]
    header += [f"property {t} {name}" for t, name in props]
    header.append("end_header")

    rows = np.zeros(n, dtype=_vertex_dtype(props))
    rows["x"], rows["y"], rows["z"] = (cloud.points[:, i].astype(np.float32) for i in range(3))
    if cloud.colors is not None:
        q = np.rint(cloud.colors * 255.0).astype(np.uint8)
        rows["red"], rows["green"], rows["blue"] = q[:, 0], q[:, 1], q[:, 2]
    if cloud.normals is not None:
        for i, name in enumerate(("nx", "ny", "nz")):
            rows[name] = cloud.normals[:, i].astype(np.float32)

    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if fmt == "binary_little_endian":
            fh.write(rows.tobytes())
        else:
            for row in rows:
                out = []
                for t, name in props:
                    out.append(_fmt(row[name]) if t == "float" else str(int(row[name])))
                fh.write((" ".join(out) + "\n").encode("ascii"))


def load_mesh(path) -> TriangleMesh:
    """Read a highlighted-mesh PLY written by :func:`save_mesh`."""
    with open(path, "rb") as fh:
        data = fh.read()
    header = _parse_header(data)
    _expect_vertex_schema(header, [_MESH_VERTEX], "mesh")
    if len(header.elements) != 2 or header.elements[1][0] != "face":
        raise PlyHeaderError("mesh PLY must contain 'vertex' then 'face' elements", line=2)
    if header.elements[1][2] != [("list uchar int", "vertex_indices")]:
        raise PlyPropertyError(
            "face element must carry exactly 'property list uchar int vertex_indices'", line=2
        )
    _, vcount, vprops = header.elements[0]
    _, fcount, _ = header.elements[1]

    if header.format == "ascii":
        rows, rest, lineno = _parse_ascii_rows(data, header.end_offset, vcount, vprops, header.line_count)
        tris = np.zeros((fcount, 3), dtype=np.int64)
        got = 0
        consumed = 0
        for i, line in enumerate(rest):
            if got == fcount:
                break
            tokens = line.split()
            consumed = i + 1
            if not tokens:
                continue
            if tokens[0] != "3" or len(tokens) != 4:
                raise PlyCountError(
                    f"only triangles are supported, got face line {line.strip()!r}",
                    line=lineno + i,
                )
            try:
                tris[got] = [int(t) for t in tokens[1:]]
            except ValueError:
                raise PlyCountError(f"bad face index in {line.strip()!r}", line=lineno + i) from None
            got += 1
        if got < fcount:
            raise PlyTruncatedError("ascii face list ended early", expected=fcount, actual=got)
        if any(line.split() for line in rest[consumed:]):
            raise PlyCountError("trailing data after declared faces", line=lineno + consumed)
    else:
        rows, offset = _parse_binary_rows(data, header.end_offset, vcount, vprops)
        face_dtype = np.dtype([("n", "u1"), ("v", "<i4", (3,))])
        need = face_dtype.itemsize * fcount
        avail = len(data) - offset
        if avail < need:
            # Walk to distinguish a short payload from a non-triangle list.
            pos = offset
            for _ in range(fcount):
                if pos >= len(data):
                    break
                arity = data[pos]
                if arity != 3:
                    raise PlyCountError(f"face arity {arity}, only 3 supported", offset=pos)
                pos += 1 + 4 * arity
            raise PlyTruncatedError(
                "binary face list ended early", expected=need, actual=avail, offset=len(data)
            )
        faces = np.frombuffer(data, dtype=face_dtype, count=fcount, offset=offset)
        bad = np.flatnonzero(faces["n"] != 3)
        if bad.size:
            pos = offset + int(bad[0]) * face_dtype.itemsize
            raise PlyCountError(f"face arity {int(faces['n'][bad[0]])}, only 3 supported", offset=pos)
        tris = faces["v"].astype(np.int64)
        offset += need
        if offset != len(data):
            raise PlyTruncatedError(
                "trailing bytes after declared faces",
                expected=need,
                actual=len(data) - (offset - need),
                offset=offset,
            )

    vertices = np.stack([rows["x"], rows["y"], rows["z"]], axis=1).astype(np.float64) \
        if vcount else np.zeros((0, 3))
    colors = np.stack(
        [rows["red"], rows["green"], rows["blue"], rows["alpha"]], axis=1
    ).astype(np.float64) / 255.0 if vcount else np.zeros((0, 4))
    density = rows["density"].astype(np.float64) if vcount else np.zeros(0)
    highlight = rows["highlight"].astype(bool) if vcount else np.zeros(0, dtype=bool)
    return TriangleMesh(
        vertices=vertices,
        triangles=tris.reshape(-1, 3),
        vertex_colors=colors,
        vertex_density=density,
        highlight=highlight,
    )


def save_mesh(mesh: TriangleMesh, path, fmt: str = "binary_little_endian") -> None:
    """Write a highlighted-mesh PLY. Colors, densities, and highlight flags required."""
    if fmt not in ("ascii", "binary_little_endian"):
        raise ValidationError(f"unsupported PLY format {fmt!r}")
    if mesh.vertex_colors is None or mesh.vertex_density is None or mesh.highlight is None:
        raise ValidationError("mesh PLY requires colors, densities, and highlight flags")

    v = len(mesh.vertices)
    f = len(mesh.triangles)
    header = ["ply", f"format {fmt} 1.0", f"element vertex {v}"]
    header += [f"property {t} {name}" for t, name in _MESH_VERTEX]
    header += [f"element face {f}", "property list uchar int vertex_indices", "end_header"]

    rows = np.zeros(v, dtype=_vertex_dtype(_MESH_VERTEX))
    for i, name in enumerate(("x", "y", "z")):
        rows[name] = mesh.vertices[:, i].astype(np.float32)
    q = np.rint(mesh.vertex_colors * 255.0).astype(np.uint8)
    for i, name in enumerate(("red", "green", "blue", "alpha")):
        rows[name] = q[:, i]
    rows["density"] = mesh.vertex_density.astype(np.float32)
    rows["highlight"] = mesh.highlight.astype(np.uint8)

    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if fmt == "binary_little_endian":
            fh.write(rows.tobytes())
            faces = np.zeros(f, dtype=np.dtype([("n", "u1"), ("v", "<i4", (3,))]))
            faces["n"] = 3
            faces["v"] = mesh.triangles.astype(np.int32)
            fh.write(faces.tobytes())
        else:
            for row in rows:
                out = [_fmt(row[n]) for n in ("x", "y", "z")]
                out += [str(int(row[n])) for n in ("red", "green", "blue", "alpha")]
                out.append(_fmt(row["density"]))
                out.append(str(int(row["highlight"])))
                fh.write((" ".join(out) + "\n").encode("ascii"))
            for tri in mesh.triangles:
                fh.write(f"3 {tri[0]} {tri[1]} {tri[2]}\n".encode("ascii"))
