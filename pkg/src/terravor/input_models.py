"""Measured realism parameters of a terrain: low density, slope, distance distortion."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geodesic import GeodesicGraph, build_geodesic_graph, geodesic_distance, single_source_field
from .geom_core import Segment2, TriangulatedTerrain, euclid_dist

DEFAULT_EPS = 0.05
DISK_SLACK = 0.02
MAX_LADDER = 30


class EmptyEdgeSet(ValueError):
    pass


class DiskClipped(ValueError):
    pass


@dataclass(frozen=True)
class RealismParams:
    xi: float
    beta: float
    lambda_est: float | None = None

    @classmethod
    def from_slope(cls, xi: float, lambda_est: float | None = None) -> "RealismParams":
        return cls(xi=float(xi), beta=math.sqrt(1.0 + float(xi) ** 2), lambda_est=lambda_est)


@dataclass(frozen=True)
class ProbeConfig:
    """Ball probes for the low-density estimate.

    Centres are every edge endpoint and midpoint plus a ``grid x grid``
    lattice of cell centres over the unit square.  Radii run over ``2**-k``
    for ``k = 0 .. ceil(log2(1/shortest edge)) + 1`` (at most ``max_k``), so
    every edge is longer than the smallest radius.
    """

    grid: int = 8
    max_k: int = MAX_LADDER


class SandwichWitness(NamedTuple):
    euclidean: float
    geodesic: float
    lower_ratio: float
    upper_ratio: float
    ok: bool


class DiskArea(NamedTuple):
    area: float
    lower_bound: float
    upper_bound: float
    lower_ok: bool
    upper_ok: bool


def slope_bound(terrain: TriangulatedTerrain) -> RealismParams:
    """Maximum triangle slope ``xi`` and the distortion constant ``beta``."""
    return RealismParams.from_slope(float(terrain.slopes.max()))


def _as_array(edges) -> np.ndarray:
    return np.asarray(edges, float).reshape(-1, 2, 2)


def point_segment_distance(c: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from centres ``c`` (C,2) to segments ``a``-``b`` (E,2); shape (C, E)."""
    ab = b - a
    L2 = np.einsum("ij,ij->i", ab, ab)
    ac = c[:, None, :] - a[None, :, :]
    t = np.einsum("cej,ej->ce", ac, ab) / np.where(L2 > 0, L2, 1.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a[None] + t[..., None] * ab[None]
    return np.linalg.norm(c[:, None, :] - proj, axis=2)


def ball_edge_count(edges, center, r: float) -> int:
    """Edges meeting the closed ball ``B(center, r)`` and longer than ``r``."""
    seg = _as_array(edges)
    d = point_segment_distance(np.asarray(center, float).reshape(1, 2), seg[:, 0], seg[:, 1])[0]
    length = np.linalg.norm(seg[:, 1] - seg[:, 0], axis=1)
    return int(np.count_nonzero((d <= r) & (length > r)))


def probe_radii(min_len: float, max_k: int = MAX_LADDER) -> np.ndarray:
    """Radii ``1, 1/2, ...`` down to one step below the shortest edge length."""
    k = min(max_k, math.ceil(math.log2(1.0 / min_len)) + 1) if min_len > 0 else max_k
    return 2.0 ** -np.arange(max(k, 0) + 1)


def low_density_estimate(edges, probes: ProbeConfig = ProbeConfig(), chunk: int = 512) -> float:
    """Lower estimate of the low-density parameter from a finite set of ball probes.

    Returns the largest number of edges that meet a probe ball and are
    longer than its radius.  The true parameter is a supremum over all balls,
    so this can only under-report it.
    """
    seg = _as_array(edges)
    if len(seg) == 0:
        raise EmptyEdgeSet("low density needs at least one edge")
    a, b = seg[:, 0], seg[:, 1]
    length = np.linalg.norm(b - a, axis=1)
    g = probes.grid
    gc = (np.arange(g) + 0.5) / g if g > 0 else np.empty(0)
    gx, gy = np.meshgrid(gc, gc)
    centers = np.unique(
        np.vstack([a, b, (a + b) / 2, np.column_stack([gx.ravel(), gy.ravel()])]), axis=0
    )
    positive = length[length > 0]
    radii = probe_radii(float(positive.min()) if len(positive) else 0.0, probes.max_k)
    best = 0
    for s in range(0, len(centers), chunk):
        d = point_segment_distance(centers[s : s + chunk], a, b)
        for r in radii:
            cnt = np.count_nonzero((d <= r) & (length > r)[None, :], axis=1)
            best = max(best, int(cnt.max()))
    return float(best)


def terrain_edge_segments(terrain: TriangulatedTerrain) -> list[Segment2]:
    xy = terrain.xy
    return [Segment2(tuple(xy[u]), tuple(xy[v])) for u, v in terrain.edges.tolist()]


def check_distance_sandwich(oracle, p, q, beta: float, eps: float = DEFAULT_EPS) -> SandwichWitness:
    """Check ``|pq| <= d_geo(p, q) <= (1 + eps) beta |pq|``.

    ``oracle`` is a :class:`GeodesicGraph` or any callable ``(p, q) -> float``.
    """
    d2 = euclid_dist(p, q)
    dg = geodesic_distance(oracle, p, q) if isinstance(oracle, GeodesicGraph) else float(oracle(p, q))
    if d2 == 0:
        return SandwichWitness(0.0, dg, 1.0, 1.0, dg == 0)
    lo, hi = dg / d2, dg / (beta * d2)
    tol = 1e-12
    return SandwichWitness(d2, dg, lo, hi, bool(lo >= 1 - tol and hi <= 1 + eps + tol))


def geodesic_disk_area(
    oracle: GeodesicGraph | None,
    terrain: TriangulatedTerrain,
    center,
    r: float,
    refinement_k: int = 4,
    slack: float = DISK_SLACK,
    samples_per_radius: int = 12,
) -> DiskArea:
    """Lifted area of the geodesic disk of radius ``r`` and its two area bounds.

    Each terrain triangle is cut into a barycentric lattice fine enough that
    sub-triangles are about ``r / samples_per_radius`` across; a sub-triangle
    counts in full when its centroid is within geodesic distance ``r``.
    Centroid distances extend the oracle's node distances by straight
    in-triangle hops.  The disk must stay clear of the domain border; the
    bounds ``pi (r/beta)^2 <= A <= pi beta r^2`` are checked with relative
    ``slack``.
    """
    cx, cy = float(center[0]), float(center[1])
    if r <= 0:
        raise ValueError("radius must be positive")
    if cx - r < 0 or cy - r < 0 or cx + r > 1 or cy + r > 1:
        raise DiskClipped(f"disk of radius {r} around {center} leaves the unit square")
    graph = oracle if oracle is not None else build_geodesic_graph(terrain, refinement_k)
    field = single_source_field(graph, (cx, cy))
    src, src_tri = field.site_xyz[0], int(field.site_tri[0])
    xyz = terrain.xyz
    area = 0.0
    for t, tri in enumerate(terrain.tris):
        corner = xyz[tri]
        span = np.max(np.linalg.norm(corner - np.roll(corner, 1, axis=0), axis=1))
        if t != src_tri and np.min(field.dist[graph.tri_nodes[t]]) - span > r:
            continue
        S = max(1, math.ceil(span * samples_per_radius / r))
        bary = _subtriangle_centroids(S)
        cen = bary @ corner
        if graph.planar:
            d = np.linalg.norm(cen - src, axis=1)
        else:
            ids = graph.tri_nodes[t]
            d = np.min(field.dist[ids][None, :] + np.linalg.norm(cen[:, None, :] - graph.nodes[ids][None], axis=2), axis=1)
            if t == src_tri:
                d = np.minimum(d, np.linalg.norm(cen - src, axis=1))
        area += terrain.lifted_areas[t] / S**2 * np.count_nonzero(d <= r)
    beta = slope_bound(terrain).beta
    lower = math.pi * (r / beta) ** 2
    upper = math.pi * beta * r**2
    return DiskArea(float(area), lower, upper, bool(area >= lower * (1 - slack)), bool(area <= upper * (1 + slack)))


def _subtriangle_centroids(S: int) -> np.ndarray:
    """Barycentric centroids of the ``S**2`` sub-triangles of a triangle."""
    out = []
    for i in range(S):
        for j in range(S - i):
            out.append((3 * i + 1, 3 * j + 1))
            if i + j <= S - 2:
                out.append((3 * i + 2, 3 * j + 2))
    ij = np.array(out, float) / (3 * S)
    return np.column_stack([1 - ij.sum(axis=1), ij])


def measure(terrain: TriangulatedTerrain, probes: ProbeConfig = ProbeConfig()) -> RealismParams:
    """Slope, distortion constant and low-density estimate of one terrain."""
    lam = low_density_estimate(terrain_edge_segments(terrain), probes)
    return RealismParams.from_slope(float(terrain.slopes.max()), lam)
