"""Domains, structured triangulations and boundary-distance queries.

Disks and annuli are meshed with concentric rings of vertices, rectangles
with a uniform grid split along alternating diagonals. Boundary vertices
are placed exactly on the boundary curve, so curved boundaries are
represented by their inscribed polygon.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Union

import numpy as np

DEFAULT_MAX_VERTICES = 200_000


class MeshError(ValueError):
    """Raised when a domain cannot be meshed or a mesh file is malformed."""


@dataclass(frozen=True)
class Disk:
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"disk radius must be positive, got {self.radius}")

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    @property
    def perimeter(self) -> float:
        return 2 * math.pi * self.radius

    @property
    def inradius(self) -> float:
        return self.radius


@dataclass(frozen=True)
class Annulus:
    r_inner: float
    r_outer: float

    def __post_init__(self):
        if not 0 < self.r_inner < self.r_outer:
            raise ValueError(
                f"annulus needs 0 < r_inner < r_outer, got {self.r_inner}, {self.r_outer}"
            )

    @property
    def area(self) -> float:
        return math.pi * (self.r_outer**2 - self.r_inner**2)

    @property
    def perimeter(self) -> float:
        return 2 * math.pi * (self.r_outer + self.r_inner)

    @property
    def inradius(self) -> float:
        return 0.5 * (self.r_outer - self.r_inner)


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle ``[0, width] x [0, height]``."""

    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"rectangle sides must be positive, got {self.width}, {self.height}")

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def perimeter(self) -> float:
        return 2 * (self.width + self.height)

    @property
    def inradius(self) -> float:
        return 0.5 * min(self.width, self.height)


@dataclass(frozen=True)
class Cylinder:
    """Flat product ``circle(radius) x (-half_length, half_length)``.

    Only treated by separation of variables (see :mod:`dtnlab.oracle`);
    it cannot be meshed.
    """

    half_length: float
    radius: float = 1.0

    def __post_init__(self):
        if not (self.half_length > 0 and self.radius > 0):
            raise ValueError("cylinder half_length and radius must be positive")


Domain = Union[Disk, Annulus, Rectangle, Cylinder]


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation with cyclically ordered boundary loops.

    ``triangles`` are counterclockwise. Arrays indexed by "boundary vertex"
    follow :attr:`boundary_vertices`, i.e. the loops concatenated in order.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_loops: tuple[np.ndarray, ...]
    domain: Domain | None = field(default=None, compare=False)

    def __post_init__(self):
        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)
        for loop in self.boundary_loops:
            loop.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @cached_property
    def edges(self) -> np.ndarray:
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def h(self) -> float:
        d = self.vertices[self.edges[:, 0]] - self.vertices[self.edges[:, 1]]
        return float(np.sqrt((d**2).sum(axis=1)).max())

    @cached_property
    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        a = p[:, 1] - p[:, 0]
        b = p[:, 2] - p[:, 0]
        return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.concatenate(self.boundary_loops)

    @cached_property
    def interior_vertices(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices] = False
        return np.flatnonzero(mask)

    @cached_property
    def boundary_segments(self) -> np.ndarray:
        """Pairs of consecutive boundary vertices (mesh indices), loop by loop."""
        segs = [np.column_stack([loop, np.roll(loop, -1)]) for loop in self.boundary_loops]
        return np.concatenate(segs)

    @property
    def area(self) -> float:
        return float(self.triangle_areas.sum())

    @property
    def perimeter(self) -> float:
        s = self.boundary_segments
        d = self.vertices[s[:, 1]] - self.vertices[s[:, 0]]
        return float(np.sqrt((d**2).sum(axis=1)).sum())

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges) + len(self.triangles)

    def boundary_position(self) -> np.ndarray:
        """Map mesh vertex index -> position in :attr:`boundary_vertices` (-1 if interior)."""
        pos = np.full(self.n_vertices, -1, dtype=int)
        pos[self.boundary_vertices] = np.arange(len(self.boundary_vertices))
        return pos

    def loop_slices(self) -> list[slice]:
        """Slices of :attr:`boundary_vertices` occupied by each loop."""
        out, start = [], 0
        for loop in self.boundary_loops:
            out.append(slice(start, start + len(loop)))
            start += len(loop)
        return out


# ---------------------------------------------------------------- meshing


def _ring(radius: float, count: int) -> np.ndarray:
    theta = 2 * np.pi * np.arange(count) / count
    pts = radius * np.column_stack([np.cos(theta), np.sin(theta)])
    if radius > 0:
        # project so that |x| == radius holds to rounding
        pts *= radius / np.linalg.norm(pts, axis=1)[:, None]
    return pts


def _stitch(inner: np.ndarray, outer: np.ndarray, pts: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate the band between two closed rings, both starting at angle 0."""
    m, n = len(inner), len(outer)
    i = j = 0
    tris = []
    while i < m or j < n:
        a0, b0 = inner[i % m], outer[j % n]
        a1, b1 = inner[(i + 1) % m], outer[(j + 1) % n]
        if i == m:
            advance_inner = False
        elif j == n:
            advance_inner = True
        else:
            ta = 2 * np.pi * (i + 1) / m
            tb = 2 * np.pi * (j + 1) / n
            if abs(ta - tb) > 1e-12:
                advance_inner = ta < tb
            else:
                d_inner = np.linalg.norm(pts[a1] - pts[b0])
                d_outer = np.linalg.norm(pts[b1] - pts[a0])
                advance_inner = d_inner <= d_outer
        if advance_inner:
            tris.append((a0, b0, a1))
            i += 1
        else:
            tris.append((a0, b0, b1))
            j += 1
    return tris


def _orient(pts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    p = pts[tris]
    a = p[:, 1] - p[:, 0]
    b = p[:, 2] - p[:, 0]
    neg = (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]) < 0
    tris = tris.copy()
    tris[neg] = tris[neg][:, [0, 2, 1]]
    return tris


def _mesh_rings(radii: list[float], counts: list[int]) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    pts, rings, start = [], [], 0
    for r, c in zip(radii, counts):
        pts.append(_ring(r, c))
        rings.append(np.arange(start, start + c))
        start += c
    pts = np.concatenate(pts)
    tris = []
    for inner, outer in zip(rings[:-1], rings[1:]):
        if len(inner) == 1:
            c = int(inner[0])
            tris += [(c, int(outer[j]), int(outer[(j + 1) % len(outer)])) for j in range(len(outer))]
        else:
            tris += _stitch(inner, outer, pts)
    return pts, _orient(pts, np.array(tris, dtype=int)), rings


def _mesh_disk(d: Disk, target_h: float):
    nr = max(1, math.ceil(d.radius / target_h - 1e-9))
    radii = [d.radius * i / nr for i in range(nr + 1)]
    radii[-1] = d.radius
    counts = [1] + [6 * i for i in range(1, nr + 1)]
    pts, tris, rings = _mesh_rings(radii, counts)
    return pts, tris, (rings[-1],)


def _mesh_annulus(a: Annulus, target_h: float):
    nr = max(1, math.ceil((a.r_outer - a.r_inner) / target_h - 1e-9))
    radii = list(np.linspace(a.r_inner, a.r_outer, nr + 1))
    counts = [max(6, math.ceil(2 * np.pi * r / target_h - 1e-9)) for r in radii]
    pts, tris, rings = _mesh_rings(radii, counts)
    # outer loop counterclockwise, inner loop clockwise: domain on the left
    return pts, tris, (rings[-1], rings[0][::-1].copy())


def _mesh_rectangle(r: Rectangle, target_h: float):
    nx = max(1, math.ceil(r.width / target_h - 1e-9))
    ny = max(1, math.ceil(r.height / target_h - 1e-9))
    xs = np.linspace(0.0, r.width, nx + 1)
    ys = np.linspace(0.0, r.height, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            v00, v10, v01, v11 = vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)
            if (i + j) % 2 == 0:
                tris += [(v00, v10, v11), (v00, v11, v01)]
            else:
                tris += [(v00, v10, v01), (v10, v11, v01)]
    loop = (
        [vid(i, 0) for i in range(nx)]
        + [vid(nx, j) for j in range(ny)]
        + [vid(i, ny) for i in range(nx, 0, -1)]
        + [vid(0, j) for j in range(ny, 0, -1)]
    )
    return pts, _orient(pts, np.array(tris, dtype=int)), (np.array(loop, dtype=int),)


def mesh_domain(domain: Domain, target_h: float, max_vertices: int = DEFAULT_MAX_VERTICES) -> Mesh:
    """Triangulate ``domain`` with edges no longer than about ``1.5 * target_h``."""
    if isinstance(domain, Cylinder):
        raise MeshError("cylinder domains are analytic-only and cannot be meshed")
    if not target_h > 0:
        raise MeshError(f"target_h must be positive, got {target_h}")
    # cheap a-priori estimate so huge requests fail before allocating
    estimate = 1.2 * domain.area / (0.43 * target_h**2) + domain.perimeter / target_h
    if estimate > 4 * max_vertices:
        raise MeshError(f"target_h={target_h} would need about {estimate:.0f} vertices (cap {max_vertices})")
    if isinstance(domain, Disk):
        pts, tris, loops = _mesh_disk(domain, target_h)
    elif isinstance(domain, Annulus):
        pts, tris, loops = _mesh_annulus(domain, target_h)
    elif isinstance(domain, Rectangle):
        pts, tris, loops = _mesh_rectangle(domain, target_h)
    else:
        raise MeshError(f"unsupported domain {domain!r}")
    if len(pts) > max_vertices:
        raise MeshError(f"mesh would have {len(pts)} vertices, above the cap of {max_vertices}")
    return Mesh(pts, tris, loops, domain)


# ---------------------------------------------------------------- distances


def _segment_distances(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from each point to each segment [a_s, b_s]; shape (P, S)."""
    ab = b - a
    ap = points[:, None, :] - a[None, :, :]
    t = np.einsum("psk,sk->ps", ap, ab) / np.einsum("sk,sk->s", ab, ab)
    t = np.clip(t, 0.0, 1.0)
    closest = a[None] + t[..., None] * ab[None]
    return np.linalg.norm(points[:, None, :] - closest, axis=2)


def boundary_distances(mesh: Mesh, points: np.ndarray, chunk: int = 2048) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`distance_to_boundary` for an array of points.

    Returns ``(y, foot)`` where ``foot`` holds mesh vertex indices.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    seg = mesh.boundary_segments
    a = mesh.vertices[seg[:, 0]]
    b = mesh.vertices[seg[:, 1]]
    bverts = mesh.boundary_vertices
    order = np.argsort(bverts, kind="stable")  # argmin over sorted ids == smallest index on ties
    bsorted = bverts[order]
    bpts = mesh.vertices[bsorted]
    y = np.empty(len(points))
    foot = np.empty(len(points), dtype=int)
    for s in range(0, len(points), chunk):
        p = points[s : s + chunk]
        y[s : s + chunk] = _segment_distances(p, a, b).min(axis=1)
        dv = np.linalg.norm(p[:, None, :] - bpts[None], axis=2)
        foot[s : s + chunk] = bsorted[dv.argmin(axis=1)]
    return y, foot


def distance_to_boundary(mesh: Mesh, point) -> tuple[float, int]:
    """Distance from ``point`` to the boundary polygon and the nearest boundary vertex.

    Ties between equidistant boundary vertices go to the smallest vertex index.
    """
    y, foot = boundary_distances(mesh, np.asarray(point, dtype=float)[None])
    return float(y[0]), int(foot[0])


# ---------------------------------------------------------------- text format


def save_mesh(mesh: Mesh, path: str | Path) -> None:
    """Write ``mesh`` in the plain-text format documented in the README."""
    lines = [f"{mesh.n_vertices} {len(mesh.edges)} {len(mesh.triangles)}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines += [" ".join(map(str, t)) for t in mesh.triangles.tolist()]
    lines.append(str(len(mesh.boundary_loops)))
    for loop in mesh.boundary_loops:
        lines.append(" ".join(map(str, [len(loop), *loop.tolist()])))
    Path(path).write_text("\n".join(lines) + "\n")


def load_mesh(path: str | Path) -> Mesh:
    tokens = Path(path).read_text().split("\n")
    rows = [r.split() for r in tokens if r.strip()]
    try:
        nv, ne, nf = map(int, rows[0])
        verts = np.array([[float(x) for x in r] for r in rows[1 : 1 + nv]])
        tris = np.array([[int(x) for x in r] for r in rows[1 + nv : 1 + nv + nf]], dtype=int)
        nloops = int(rows[1 + nv + nf][0])
        loops = []
        for r in rows[2 + nv + nf : 2 + nv + nf + nloops]:
            n = int(r[0])
            loop = np.array([int(x) for x in r[1:]], dtype=int)
            if len(loop) != n:
                raise MeshError("boundary loop length does not match its header")
            loops.append(loop)
    except (IndexError, ValueError) as exc:
        raise MeshError(f"malformed mesh file {path}: {exc}") from exc
    if verts.shape != (nv, 2) or tris.shape != (nf, 3) or len(loops) != nloops:
        raise MeshError(f"malformed mesh file {path}: section sizes do not match header")
    mesh = Mesh(verts, tris, tuple(loops))
    if len(mesh.edges) != ne:
        raise MeshError(f"edge count {len(mesh.edges)} does not match header value {ne}")
    return mesh
