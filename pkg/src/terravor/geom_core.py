"""Points, triangulated terrains over the unit square, and exact predicates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

TAU_COVER = 1e-9

# Shewchuk's static filter for the 2x2 orientation determinant.
_ORIENT_ERRBOUND = (3.0 + 16.0 * np.finfo(float).eps) * np.finfo(float).eps


class TerrainError(ValueError):
    """Base class for invalid terrain input."""


class DegenerateTriangle(TerrainError):
    pass


class NonManifoldEdge(TerrainError):
    pass


class DomainNotCovered(TerrainError):
    pass


class OutsideDomain(ValueError):
    pass


class Point2(NamedTuple):
    x: float
    y: float


class Point3(NamedTuple):
    x: float
    y: float
    z: float


class Segment2(NamedTuple):
    a: Point2
    b: Point2

    @property
    def length(self) -> float:
        return math.hypot(self.b.x - self.a.x, self.b.y - self.a.y)


def euclid_dist(p, q) -> float:
    """Planar distance between two points (only x and y are used)."""
    return math.hypot(q[0] - p[0], q[1] - p[1])


def orient2d(a, b, c) -> int:
    """Sign of the turn a -> b -> c: +1 left, -1 right, 0 collinear.

    Exact for double inputs: a floating-point filter handles the easy cases
    and rational arithmetic settles the rest.
    """
    detleft = (b[0] - a[0]) * (c[1] - a[1])
    detright = (b[1] - a[1]) * (c[0] - a[0])
    det = detleft - detright
    errbound = _ORIENT_ERRBOUND * (abs(detleft) + abs(detright))
    if det > errbound:
        return 1
    if -det > errbound:
        return -1
    ax, ay = Fraction(a[0]), Fraction(a[1])
    exact = (Fraction(b[0]) - ax) * (Fraction(c[1]) - ay) - (Fraction(b[1]) - ay) * (
        Fraction(c[0]) - ax
    )
    return (exact > 0) - (exact < 0)


def segments_intersect(p1, p2, q1, q2) -> bool:
    """Closed-segment intersection test built on :func:`orient2d`."""
    d1 = orient2d(q1, q2, p1)
    d2 = orient2d(q1, q2, p2)
    d3 = orient2d(p1, p2, q1)
    d4 = orient2d(p1, p2, q2)
    if d1 * d2 < 0 and d3 * d4 < 0:
        return True

    def on_seg(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(
            a[1], b[1]
        )

    return (
        (d1 == 0 and on_seg(q1, q2, p1))
        or (d2 == 0 and on_seg(q1, q2, p2))
        or (d3 == 0 and on_seg(p1, p2, q1))
        or (d4 == 0 and on_seg(p1, p2, q2))
    )


def _on_square_side(a, b) -> bool:
    for axis in (0, 1):
        for v in (0.0, 1.0):
            if a[axis] == v and b[axis] == v:
                return True
    return False


@dataclass(frozen=True, eq=False)
class TriangulatedTerrain:
    """Height field over the unit square defined by a triangulation.

    Attributes
    ----------
    xy : ndarray, shape (n, 2)
        Projected vertex positions.
    z : ndarray, shape (n,)
        Vertex heights.
    tris : ndarray, shape (t, 3)
        Vertex indices, normalised to counter-clockwise order.
    """

    xy: np.ndarray
    z: np.ndarray
    tris: np.ndarray
    _bucket_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_vertices(self) -> int:
        return len(self.xy)

    @property
    def n_triangles(self) -> int:
        return len(self.tris)

    @property
    def vertices(self) -> list[Point2]:
        return [Point2(float(x), float(y)) for x, y in self.xy]

    @property
    def heights(self) -> list[float]:
        return [float(h) for h in self.z]

    @cached_property
    def xyz(self) -> np.ndarray:
        return np.column_stack([self.xy, self.z])

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted index pairs, lexicographic order."""
        e = np.concatenate([self.tris[:, [0, 1]], self.tris[:, [1, 2]], self.tris[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def edge_triangles(self) -> dict[tuple[int, int], list[int]]:
        out: dict[tuple[int, int], list[int]] = {}
        for t, (a, b, c) in enumerate(self.tris.tolist()):
            for u, v in ((a, b), (b, c), (c, a)):
                out.setdefault((min(u, v), max(u, v)), []).append(t)
        return out

    @cached_property
    def projected_areas(self) -> np.ndarray:
        p = self.xy[self.tris]
        u = p[:, 1] - p[:, 0]
        v = p[:, 2] - p[:, 0]
        return 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])

    @cached_property
    def lifted_areas(self) -> np.ndarray:
        p = self.xyz[self.tris]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)

    @cached_property
    def gradients(self) -> np.ndarray:
        """Gradient (dz/dx, dz/dy) of the affine height map on each triangle."""
        p = self.xy[self.tris]
        h = self.z[self.tris]
        u = p[:, 1] - p[:, 0]
        v = p[:, 2] - p[:, 0]
        du = h[:, 1] - h[:, 0]
        dv = h[:, 2] - h[:, 0]
        det = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
        gx = (du * v[:, 1] - dv * u[:, 1]) / det
        gy = (dv * u[:, 0] - du * v[:, 0]) / det
        return np.column_stack([gx, gy])

    @cached_property
    def slopes(self) -> np.ndarray:
        return np.hypot(self.gradients[:, 0], self.gradients[:, 1])

    @cached_property
    def plane(self) -> tuple[float, float, float] | None:
        """Coefficients (a, b, c) of z = a x + b y + c if every vertex lies on it."""
        g = self.gradients
        if not np.allclose(g, g[0], rtol=0.0, atol=1e-12):
            return None
        a, b = (float(v) for v in g[0])
        c = float(np.mean(self.z - a * self.xy[:, 0] - b * self.xy[:, 1]))
        resid = self.z - (a * self.xy[:, 0] + b * self.xy[:, 1] + c)
        if np.max(np.abs(resid)) > 1e-12:
            return None
        return a, b, c

    def _buckets(self):
        if "grid" not in self._bucket_cache:
            g = max(1, min(256, int(math.sqrt(self.n_triangles))))
            cells: list[list[list[int]]] = [[[] for _ in range(g)] for _ in range(g)]
            p = self.xy[self.tris]
            lo = np.clip(np.floor((p.min(axis=1) - 1e-12) * g).astype(int), 0, g - 1)
            hi = np.clip(np.floor((p.max(axis=1) + 1e-12) * g).astype(int), 0, g - 1)
            for t in range(self.n_triangles):
                for i in range(lo[t, 0], hi[t, 0] + 1):
                    for j in range(lo[t, 1], hi[t, 1] + 1):
                        cells[i][j].append(t)
            self._bucket_cache["grid"] = (g, cells)
        return self._bucket_cache["grid"]

    def contains(self, t: int, p) -> bool:
        a, b, c = (self.xy[i] for i in self.tris[t])
        return orient2d(a, b, p) >= 0 and orient2d(b, c, p) >= 0 and orient2d(c, a, p) >= 0

    def locate(self, p) -> int:
        """Index of the triangle containing ``p``; boundary points go to the lowest index."""
        x, y = float(p[0]), float(p[1])
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0) or not (math.isfinite(x) and math.isfinite(y)):
            raise OutsideDomain(f"point ({x}, {y}) is outside the unit square")
        g, cells = self._buckets()
        i = min(int(x * g), g - 1)
        j = min(int(y * g), g - 1)
        for t in cells[i][j]:
            if self.contains(t, (x, y)):
                return t
        # bucket rounding at cell borders; fall back to a full scan
        for t in range(self.n_triangles):
            if self.contains(t, (x, y)):
                return t
        raise OutsideDomain(f"no triangle contains ({x}, {y})")

    def barycentric(self, t: int, p) -> np.ndarray:
        a, b, c = self.xy[self.tris[t]]
        det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (p[1] - a[1]) * (c[0] - a[0])) / det
        l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) / det
        return np.array([1.0 - l1 - l2, l1, l2])

    def height_at(self, p, t: int | None = None) -> float:
        if t is None:
            t = self.locate(p)
        return float(self.barycentric(t, p) @ self.z[self.tris[t]])


def build_terrain(
    vertices: Sequence, heights: Sequence[float], triangles: Iterable[Sequence[int]]
) -> TriangulatedTerrain:
    """Validate input and return an immutable terrain.

    Triangles are reoriented counter-clockwise. Raises
    :class:`DegenerateTriangle`, :class:`NonManifoldEdge` or
    :class:`DomainNotCovered` naming the offending simplex.
    """
    xy = np.asarray(vertices, dtype=float).reshape(-1, 2)
    z = np.asarray(heights, dtype=float).reshape(-1)
    tris = np.asarray(list(triangles), dtype=np.int64).reshape(-1, 3)
    n = len(xy)
    if len(z) != n:
        raise ValueError(f"{len(z)} heights for {n} vertices")
    if not (np.all(np.isfinite(xy)) and np.all(np.isfinite(z))):
        raise ValueError("non-finite vertex coordinate or height")
    if len(tris) == 0:
        raise DomainNotCovered("no triangles")
    if tris.min() < 0 or tris.max() >= n:
        bad = int(np.flatnonzero((tris < 0).any(1) | (tris >= n).any(1))[0])
        raise IndexError(f"triangle {bad} {tris[bad].tolist()} has an index out of range")
    outside = np.flatnonzero((xy < 0).any(1) | (xy > 1).any(1))
    if len(outside):
        v = int(outside[0])
        raise DomainNotCovered(f"vertex {v} {xy[v].tolist()} lies outside the unit square")

    tris = tris.copy()
    for t, (a, b, c) in enumerate(tris.tolist()):
        if len({a, b, c}) < 3:
            raise DegenerateTriangle(f"triangle {t} {[a, b, c]} repeats a vertex")
        s = orient2d(xy[a], xy[b], xy[c])
        if s == 0:
            raise DegenerateTriangle(f"triangle {t} {[a, b, c]} has zero area")
        if s < 0:
            tris[t] = (a, c, b)

    directed: dict[tuple[int, int], int] = {}
    for t, (a, b, c) in enumerate(tris.tolist()):
        for u, v in ((a, b), (b, c), (c, a)):
            if (u, v) in directed:
                raise NonManifoldEdge(
                    f"edge ({u}, {v}) used with the same orientation by triangles "
                    f"{directed[(u, v)]} and {t} (overlap)"
                )
            directed[(u, v)] = t
    for (u, v), t in directed.items():
        if (v, u) not in directed and not _on_square_side(xy[u], xy[v]):
            raise DomainNotCovered(
                f"boundary edge ({u}, {v}) of triangle {t} is not on the domain boundary"
            )

    terrain = TriangulatedTerrain(xy=xy, z=z, tris=tris)
    total = float(terrain.projected_areas.sum())
    if abs(total - 1.0) > TAU_COVER:
        raise DomainNotCovered(f"triangles cover area {total!r}, expected 1")
    xy.setflags(write=False)
    z.setflags(write=False)
    tris.setflags(write=False)
    return terrain


def lift(terrain: TriangulatedTerrain, p) -> Point3:
    """Lift a domain point onto the terrain surface."""
    t = terrain.locate(p)
    return Point3(float(p[0]), float(p[1]), terrain.height_at(p, t))


def lifted_segment_length(terrain: TriangulatedTerrain, p, q) -> float:
    """3D length of the straight projected segment ``pq`` draped over the terrain.

    A surface path, so never shorter than the geodesic between the lifted
    endpoints.
    """
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    d = q - p
    a = terrain.xy[terrain.edges[:, 0]]
    e = terrain.xy[terrain.edges[:, 1]] - a
    denom = d[0] * e[:, 1] - d[1] * e[:, 0]
    ok = denom != 0
    ap = a[ok] - p
    with np.errstate(over="ignore"):
        t = (ap[:, 0] * e[ok, 1] - ap[:, 1] * e[ok, 0]) / denom[ok]
        s = (ap[:, 0] * d[1] - ap[:, 1] * d[0]) / denom[ok]
    t = t[(t > 0) & (t < 1) & (s >= 0) & (s <= 1)]
    ts = np.unique(np.concatenate([[0.0, 1.0], t]))
    pts = np.clip(p + ts[:, None] * d, 0.0, 1.0)
    z = np.array([terrain.height_at(x) for x in pts])
    return float(np.sum(np.sqrt(np.sum(np.diff(pts, axis=0) ** 2, axis=1) + np.diff(z) ** 2)))


def triangle_slope(terrain: TriangulatedTerrain, t: int) -> float:
    """Largest slope of a segment in lifted triangle ``t`` (norm of its height gradient)."""
    return float(terrain.slopes[t])


# ---------------------------------------------------------------- builders


def flat_square(height: float = 0.0) -> TriangulatedTerrain:
    return build_terrain([(0, 0), (1, 0), (1, 1), (0, 1)], [height] * 4, [(0, 1, 2), (0, 2, 3)])


def pyramid(apex: float = 1.0) -> TriangulatedTerrain:
    """Four-triangle fan around the centre with the apex raised."""
    return build_terrain(
        [(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0.5)],
        [0, 0, 0, 0, apex],
        [(0, 1, 4), (1, 2, 4), (2, 3, 4), (3, 0, 4)],
    )


def grid_terrain(nx: int, ny: int | None = None, height=None) -> TriangulatedTerrain:
    """Regular grid split along one diagonal; ``height`` maps (x, y) arrays to z."""
    ny = nx if ny is None else ny
    xs = np.arange(nx + 1) / nx
    ys = np.arange(ny + 1) / ny
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    xy = np.column_stack([X.ravel(), Y.ravel()])
    z = np.zeros(len(xy)) if height is None else np.asarray(height(xy[:, 0], xy[:, 1]), float)
    idx = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[1:, :-1].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[:-1, 1:].ravel()
    tris = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return build_terrain(xy, z, tris)


# ---------------------------------------------------------------- text format


def format_terrain(terrain: TriangulatedTerrain, comment: str | None = None) -> str:
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.append(f"TERRAIN {terrain.n_vertices} {terrain.n_triangles}")
    for (x, y), h in zip(terrain.xy.tolist(), terrain.z.tolist()):
        lines.append(f"v {x:.17g} {y:.17g} {h:.17g}")
    for a, b, c in terrain.tris.tolist():
        lines.append(f"t {a} {b} {c}")
    return "\n".join(lines) + "\n"


def write_terrain(terrain: TriangulatedTerrain, path, comment: str | None = None) -> None:
    Path(path).write_text(format_terrain(terrain, comment))


def parse_terrain(text: str) -> TriangulatedTerrain:
    rows = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    if not rows or rows[0][0] != "TERRAIN" or len(rows[0]) != 3:
        raise ValueError("terrain file must start with 'TERRAIN <n_vertices> <n_triangles>'")
    nv, nt = int(rows[0][1]), int(rows[0][2])
    verts, heights, tris = [], [], []
    for r in rows[1:]:
        if r[0] == "v" and len(r) == 4:
            verts.append((float(r[1]), float(r[2])))
            heights.append(float(r[3]))
        elif r[0] == "t" and len(r) == 4:
            tris.append((int(r[1]), int(r[2]), int(r[3])))
        else:
            raise ValueError(f"malformed terrain line: {' '.join(r)!r}")
    if len(verts) != nv or len(tris) != nt:
        raise ValueError(
            f"header declares {nv} vertices / {nt} triangles, found {len(verts)} / {len(tris)}"
        )
    return build_terrain(verts, heights, tris)


def read_terrain(path) -> TriangulatedTerrain:
    return parse_terrain(Path(path).read_text())
