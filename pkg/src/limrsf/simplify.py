"""Quadric-error mesh simplification by greedy edge collapse.

Every vertex accumulates a quadric Q(v) = v^T A v + 2 b^T v + c from the
planes of its incident triangles; collapsing an edge merges the endpoint
quadrics and places the surviving vertex at the minimizer of the combined
quadric (or at the best of the two endpoints and the midpoint when the
system is ill-conditioned). Collapses are popped from a heap ordered by
cost with a monotone counter as the tie-break, so results are fully
deterministic. Collapses that would flip an incident triangle's normal are
rejected, and edges shared by more than two triangles are skipped.

The inner loop deliberately runs on plain Python floats: collapse updates
touch a dozen scalars at a time, where numpy dispatch overhead dominates
any vectorization win.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .mesh import TriangleMesh

logger = logging.getLogger(__name__)

_COND_LIMIT = 1e8
_TWO_PI_3 = 2.0 * math.pi / 3.0


@dataclass
class Quadric:
    """Quadratic form Q(v) = v^T A v + 2 b^T v + c with symmetric A.

    Built from plane sums it is positive semidefinite, so Q(v) >= 0 up to
    rounding for every v.
    """

    A: np.ndarray
    b: np.ndarray
    c: float

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.float64).reshape(3, 3)
        self.b = np.asarray(self.b, dtype=np.float64).reshape(3)
        self.c = float(self.c)
        if not np.allclose(self.A, self.A.T, atol=1e-12):
            raise ValidationError("quadric A matrix must be symmetric")

    def evaluate(self, v) -> float:
        v = np.asarray(v, dtype=np.float64).reshape(3)
        return float(v @ self.A @ v + 2.0 * (self.b @ v) + self.c)

    def __add__(self, other: "Quadric") -> "Quadric":
        return Quadric(self.A + other.A, self.b + other.b, self.c + other.c)


def _packed_quadrics(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Per-vertex quadrics as rows [a00,a01,a02,a11,a12,a22,b0,b1,b2,c]."""
    packed = np.zeros((vertices.shape[0], 10), dtype=np.float64)
    if triangles.size == 0:
        return packed
    p0 = vertices[triangles[:, 0]]
    normal = np.cross(vertices[triangles[:, 1]] - p0, vertices[triangles[:, 2]] - p0)
    length = np.sqrt(np.sum(normal**2, axis=1))
    ok = length > 0.0
    normal = np.where(ok[:, None], normal / np.maximum(length, 1e-300)[:, None], 0.0)
    d = -np.sum(normal * p0, axis=1)

    contrib = np.empty((triangles.shape[0], 10), dtype=np.float64)
    contrib[:, 0] = normal[:, 0] * normal[:, 0]
    contrib[:, 1] = normal[:, 0] * normal[:, 1]
    contrib[:, 2] = normal[:, 0] * normal[:, 2]
    contrib[:, 3] = normal[:, 1] * normal[:, 1]
    contrib[:, 4] = normal[:, 1] * normal[:, 2]
    contrib[:, 5] = normal[:, 2] * normal[:, 2]
    contrib[:, 6] = d * normal[:, 0]
    contrib[:, 7] = d * normal[:, 1]
    contrib[:, 8] = d * normal[:, 2]
    contrib[:, 9] = d * d
    contrib[~ok] = 0.0  # zero-area triangles define no plane

    for corner in range(3):
        np.add.at(packed, triangles[:, corner], contrib)
    return packed


def vertex_quadrics(mesh: TriangleMesh) -> list[Quadric]:
    """The accumulated plane quadric of every vertex (for inspection/tests)."""
    out = []
    for row in _packed_quadrics(mesh.vertices, mesh.triangles):
        a00, a01, a02, a11, a12, a22, b0, b1, b2, c = row
        out.append(
            Quadric(
                np.array([[a00, a01, a02], [a01, a11, a12], [a02, a12, a22]]),
                np.array([b0, b1, b2]),
                c,
            )
        )
    return out


def _sym_eigenvalues(a00, a01, a02, a11, a12, a22):
    """Eigenvalues of a symmetric 3x3, descending, by the trigonometric formula."""
    q = (a00 + a11 + a22) / 3.0
    p1 = a01 * a01 + a02 * a02 + a12 * a12
    p2 = (a00 - q) ** 2 + (a11 - q) ** 2 + (a22 - q) ** 2 + 2.0 * p1
    if p2 <= 0.0:
        return q, q, q
    p = math.sqrt(p2 / 6.0)
    c00, c11, c22 = (a00 - q) / p, (a11 - q) / p, (a22 - q) / p
    c01, c02, c12 = a01 / p, a02 / p, a12 / p
    half_det = (
        c00 * (c11 * c22 - c12 * c12)
        - c01 * (c01 * c22 - c12 * c02)
        + c02 * (c01 * c12 - c11 * c02)
    ) / 2.0
    half_det = max(-1.0, min(1.0, half_det))
    phi = math.acos(half_det) / 3.0
    e1 = q + 2.0 * p * math.cos(phi)
    e3 = q + 2.0 * p * math.cos(phi + _TWO_PI_3)
    return e1, 3.0 * q - e1 - e3, e3


def _edge_cost(qa, qb, pa, pb):
    """Combined quadric cost and placement for collapsing an edge.

    Returns (cost, position). Uses the quadric minimizer when the combined
    A is well conditioned (2-norm condition <= 1e8), otherwise the best of
    the two endpoints and the midpoint (ties keep that order).
    """
    a00 = qa[0] + qb[0]
    a01 = qa[1] + qb[1]
    a02 = qa[2] + qb[2]
    a11 = qa[3] + qb[3]
    a12 = qa[4] + qb[4]
    a22 = qa[5] + qb[5]
    b0 = qa[6] + qb[6]
    b1 = qa[7] + qb[7]
    b2 = qa[8] + qb[8]
    c = qa[9] + qb[9]

    e1, _, e3 = _sym_eigenvalues(a00, a01, a02, a11, a12, a22)
    det = (
        a00 * (a11 * a22 - a12 * a12)
        - a01 * (a01 * a22 - a12 * a02)
        + a02 * (a01 * a12 - a11 * a02)
    )
    if e3 > 0.0 and e1 <= _COND_LIMIT * e3 and det > 0.0:
        # Solve A v = -b by cofactors.
        x = (
            -b0 * (a11 * a22 - a12 * a12)
            - a01 * (-b1 * a22 - a12 * -b2)
            + a02 * (-b1 * a12 - a11 * -b2)
        ) / det
        y = (
            a00 * (-b1 * a22 - a12 * -b2)
            - -b0 * (a01 * a22 - a12 * a02)
            + a02 * (a01 * -b2 - -b1 * a02)
        ) / det
        z = (
            a00 * (a11 * -b2 - -b1 * a12)
            - a01 * (a01 * -b2 - -b1 * a02)
            + -b0 * (a01 * a12 - a11 * a02)
        ) / det
        cost = (
            x * (a00 * x + a01 * y + a02 * z)
            + y * (a01 * x + a11 * y + a12 * z)
            + z * (a02 * x + a12 * y + a22 * z)
            + 2.0 * (b0 * x + b1 * y + b2 * z)
            + c
        )
        return cost, (x, y, z)

    best_cost = math.inf
    best = pa
    for candidate in (
        pa,
        pb,
        ((pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0, (pa[2] + pb[2]) / 2.0),
    ):
        x, y, z = candidate
        cost = (
            x * (a00 * x + a01 * y + a02 * z)
            + y * (a01 * x + a11 * y + a12 * z)
            + z * (a02 * x + a12 * y + a22 * z)
            + 2.0 * (b0 * x + b1 * y + b2 * z)
            + c
        )
        if cost < best_cost:
            best_cost = cost
            best = candidate
    return best_cost, best


def _triangle_normal(pa, pb, pc):
    ux, uy, uz = pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]
    vx, vy, vz = pc[0] - pa[0], pc[1] - pa[1], pc[2] - pa[2]
    return (uy * vz - uz * vy, uz * vx - ux * vz, ux * vy - uy * vx)


def simplify_mesh(
    mesh: TriangleMesh, target_vertex_count: int, *, return_ancestry: bool = False
):
    """Collapse edges greedily until ``target_vertex_count`` vertices remain.

    Per collapse, the surviving vertex takes the OR of the endpoint
    highlight flags and the average of their colors and densities. Stops
    early (with fewer collapses than requested) only when no legal collapse
    remains. A target at or above the current vertex count is a warning
    no-op.

    With ``return_ancestry=True``, returns ``(mesh, ancestry)`` where
    ``ancestry[i]`` is the frozenset of input vertex indices merged into
    output vertex i.
    """
    if not isinstance(target_vertex_count, (int, np.integer)) or target_vertex_count < 4:
        raise ValidationError(
            f"target_vertex_count must be an integer >= 4, got {target_vertex_count!r}"
        )
    target = int(target_vertex_count)
    v_count = mesh.vertex_count
    if target >= v_count:
        logger.warning(
            "simplification target %d >= vertex count %d; returning the mesh unchanged",
            target,
            v_count,
        )
        if return_ancestry:
            return mesh, tuple(frozenset((i,)) for i in range(v_count))
        return mesh

    pos: list = [tuple(p) for p in mesh.vertices.tolist()]
    quad: list = [list(row) for row in _packed_quadrics(mesh.vertices, mesh.triangles).tolist()]
    tris: list = [list(t) for t in mesh.triangles.tolist()]
    vert_tris: list = [set() for _ in range(v_count)]
    for t, (i, j, k) in enumerate(tris):
        vert_tris[i].add(t)
        vert_tris[j].add(t)
        vert_tris[k].add(t)

    alive = [True] * v_count
    stamp = [0] * v_count
    alive_count = v_count

    colors = None if mesh.vertex_colors is None else [list(c) for c in mesh.vertex_colors.tolist()]
    density = None if mesh.vertex_density is None else list(mesh.vertex_density.tolist())
    highlight = None if mesh.highlight is None else list(mesh.highlight.tolist())
    ancestry = [{i} for i in range(v_count)] if return_ancestry else None

    heap: list = []
    counter = 0

    def push_edge(a: int, b: int):
        nonlocal counter
        if a > b:
            a, b = b, a
        cost, vbar = _edge_cost(quad[a], quad[b], pos[a], pos[b])
        heapq.heappush(heap, (cost, counter, a, b, stamp[a], stamp[b], vbar))
        counter += 1

    seen = set()
    for i, j, k in tris:
        for a, b in ((i, j), (j, k), (i, k)):
            key = (a, b) if a < b else (b, a)
            if key not in seen:
                seen.add(key)
                push_edge(*key)
    del seen

    while alive_count > target and heap:
        cost, _, a, b, sa, sb, vbar = heapq.heappop(heap)
        if not (alive[a] and alive[b]) or stamp[a] != sa or stamp[b] != sb:
            continue
        shared = vert_tris[a] & vert_tris[b]
        if not shared or len(shared) > 2:
            continue  # gone, or non-manifold: never collapsed

        # Reject the collapse if any surviving incident triangle would flip.
        rejected = False
        for t in (vert_tris[a] | vert_tris[b]) - shared:
            i, j, k = tris[t]
            before = _triangle_normal(pos[i], pos[j], pos[k])
            mag = before[0] ** 2 + before[1] ** 2 + before[2] ** 2
            if mag == 0.0:
                continue  # already degenerate; carries no orientation
            after = _triangle_normal(
                vbar if i in (a, b) else pos[i],
                vbar if j in (a, b) else pos[j],
                vbar if k in (a, b) else pos[k],
            )
            if before[0] * after[0] + before[1] * after[1] + before[2] * after[2] <= 0.0:
                rejected = True
                break
        if rejected:
            continue

        # Collapse b into a.
        stamp[a] += 1
        stamp[b] += 1
        alive[b] = False
        alive_count -= 1
        pos[a] = vbar
        qa = quad[a]
        qb = quad[b]
        for c in range(10):
            qa[c] += qb[c]
        if colors is not None:
            ca, cb = colors[a], colors[b]
            colors[a] = [(ca[n] + cb[n]) / 2.0 for n in range(4)]
        if density is not None:
            density[a] = (density[a] + density[b]) / 2.0
        if highlight is not None:
            highlight[a] = highlight[a] or highlight[b]
        if ancestry is not None:
            ancestry[a] |= ancestry[b]

        for t in shared:
            i, j, k = tris[t]
            vert_tris[i].discard(t)
            vert_tris[j].discard(t)
            vert_tris[k].discard(t)
            tris[t] = None
        for t in vert_tris[b]:
            tri = tris[t]
            for corner in range(3):
                if tri[corner] == b:
                    tri[corner] = a
            vert_tris[a].add(t)
        vert_tris[b] = set()

        neighbors = set()
        for t in vert_tris[a]:
            neighbors.update(tris[t])
        neighbors.discard(a)
        for u in neighbors:
            push_edge(a, u)

    remap = np.full(v_count, -1, dtype=np.int64)
    keep = [i for i in range(v_count) if alive[i]]
    remap[keep] = np.arange(len(keep))
    new_vertices = np.array([pos[i] for i in keep], dtype=np.float64).reshape(-1, 3)
    new_tris = np.array(
        [t for t in tris if t is not None], dtype=np.int64
    ).reshape(-1, 3)
    new_tris = remap[new_tris] if new_tris.size else new_tris

    out = TriangleMesh(
        vertices=new_vertices,
        triangles=new_tris,
        vertex_colors=None
        if colors is None
        else np.clip(np.array([colors[i] for i in keep], dtype=np.float64), 0.0, 1.0).reshape(-1, 4),
        vertex_density=None
        if density is None
        else np.array([density[i] for i in keep], dtype=np.float64),
        highlight=None
        if highlight is None
        else np.array([highlight[i] for i in keep], dtype=bool),
    )
    if return_ancestry:
        return out, tuple(frozenset(ancestry[i]) for i in keep)
    return out
