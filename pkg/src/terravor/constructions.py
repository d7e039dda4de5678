"""Lower-bound scenes: planar grid, farming and industrial farming.

Farms are plateau squares at a common height, connected by one-dimensional
roads to a block of ``2n`` steep ridges near the east wall.  Everything off
the plateau is forbidden ground that cannot influence distances on it, so
the scenes are never realised as height fields; distances follow from the
layout alone.  Coordinates use north-positive ``y`` with the farm grid
anchored at the north-west corner of the unit square.

Dimensions are kept as exact fractions whenever ``sqrt(m)`` is an integer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .geom_core import Point2, TriangulatedTerrain, build_terrain

DEFAULT_C = 2
DEFAULT_W = Fraction(4, 5)
DEFAULT_C0 = 4


class TooManySitesForRidgeWidth(ValueError):
    pass


class NegativeSegment(ValueError):
    pass


class OffPlateau(ValueError):
    pass


def _num(v):
    """Fraction for exact inputs, float otherwise."""
    if isinstance(v, (Fraction, int)):
        return Fraction(v)
    return Fraction(str(v)) if isinstance(v, float) and math.isfinite(v) else v


def inv_sqrt(m: int):
    r = math.isqrt(m)
    return Fraction(1, r) if r * r == m else 1.0 / math.sqrt(m)


@dataclass(frozen=True)
class Farm:
    """Square plateau; ``origin`` is its north-west corner, ``entrance`` its south-east."""

    index: int
    origin: Point2
    side: object
    entrance: Point2
    exit: Point2
    road_length: object
    row: int = 0
    col: int = 0


@dataclass(frozen=True)
class RidgeBlock:
    x_position: object
    n: int
    c: object = 1

    @property
    def rectangle_count(self) -> int:
        return 2 * self.n

    @property
    def crossing_cost(self) -> int:
        return 2 * self.n

    @property
    def geodesic_width(self) -> float:
        # 1 / (c 2^n); only ever used as a vanishing width
        return math.ldexp(1.0 / float(self.c), -self.n)

    @property
    def projected_width(self) -> float:
        # 45 degree faces shrink the footprint by sqrt(2)
        return self.geodesic_width / math.sqrt(2.0)


@dataclass
class ConstructionScene:
    kind: str
    m: int
    n: int
    c: object
    w: object
    farms: list[Farm] = field(default_factory=list)
    ridge_block: RidgeBlock | None = None
    grid_size: int = 0

    @property
    def farm_count(self) -> int:
        return len(self.farms)

    @property
    def exit_y(self) -> np.ndarray:
        return np.array([float(f.exit.y) for f in self.farms])

    @property
    def entrances(self) -> np.ndarray:
        return np.array([[float(f.entrance.x), float(f.entrance.y)] for f in self.farms])

    def farm_of(self, pts) -> np.ndarray:
        """Index of the farm containing each point, or -1."""
        pts = np.asarray(pts, float).reshape(-1, 2)
        out = np.full(len(pts), -1, dtype=np.int64)
        if not self.farms:
            return out
        side = float(self.farms[0].side)
        if self.kind == "farming":
            pitch = 3 * side
            k = np.floor((1.0 - pts[:, 1]) / pitch).astype(np.int64)
            inside = (pts[:, 0] <= side) & ((1.0 - pts[:, 1]) - k * pitch <= side)
            inside &= (k >= 0) & (k < len(self.farms))
            out[inside] = k[inside]
            return out
        M = self.grid_size
        col = np.floor(pts[:, 0] / (2 * side)).astype(np.int64)
        row = np.floor((1.0 - pts[:, 1]) / (3 * side)).astype(np.int64)
        inside = (pts[:, 0] - col * 2 * side <= side) & ((1.0 - pts[:, 1]) - row * 3 * side <= side)
        inside &= (col >= 0) & (col < M) & (row >= 0) & (row < M)
        out[inside] = row[inside] * M + col[inside]
        return out

    def as_dict(self) -> dict:
        def pt(p):
            return [float(p.x), float(p.y)]

        return {
            "kind": self.kind,
            "m": self.m,
            "n": self.n,
            "c": float(self.c),
            "w": float(self.w),
            "farm_count": self.farm_count,
            "grid_size": self.grid_size,
            "farm_side": float(self.farms[0].side) if self.farms else None,
            "ridge": {
                "x_position": float(self.ridge_block.x_position),
                "rectangle_count": self.ridge_block.rectangle_count,
                "geodesic_width": self.ridge_block.geodesic_width,
                "crossing_cost": self.ridge_block.crossing_cost,
            }
            if self.ridge_block
            else None,
            "farms": [
                {
                    "index": f.index,
                    "row": f.row,
                    "col": f.col,
                    "origin": pt(f.origin),
                    "side": float(f.side),
                    "entrance": pt(f.entrance),
                    "exit": pt(f.exit),
                    "road_length": float(f.road_length),
                }
                for f in self.farms
            ],
        }


# ---------------------------------------------------------------- planar grid


@dataclass
class PlanarGridScene:
    n: int
    m: int
    sites: np.ndarray
    line_x: np.ndarray
    overlay_count: int

    def as_dict(self) -> dict:
        return {
            "kind": "planar",
            "n": self.n,
            "m": self.m,
            "overlay_count": self.overlay_count,
            "sites": self.sites.tolist(),
            "line_x": self.line_x.tolist(),
        }


def gen_planar_grid(n: int, m: int, site_x: float = 0.05, east_band=(0.8, 0.99)) -> PlanarGridScene:
    """``m`` sites stacked along the west wall, ``n`` north-south lines near the east wall.

    Bisectors of consecutive sites are horizontal and each crosses all
    ``n`` lines, so the overlay has ``(m - 1) n`` crossings.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    ys = (np.arange(m) + 0.5) / m
    sites = np.column_stack([np.full(m, site_x), ys])
    lo, hi = east_band
    line_x = np.linspace(lo, hi, n) if n > 1 else np.array([lo])
    return PlanarGridScene(n, m, sites, line_x, (m - 1) * n)


def planar_grid_mesh(scene: PlanarGridScene) -> TriangulatedTerrain:
    """Flat triangulation whose interior edges are exactly ``n`` north-south lines.

    The lines form a zigzag ``v_0 v_1 ... v_n`` alternating between the
    north and south walls, anchored at the north-west corner ``v_0`` and
    ending in an east corner ``v_n``; the remaining triangles only add
    edges on the domain boundary.
    """
    n = scene.n
    xs = [0.0]
    if n >= 2:
        xs += list(np.linspace(*_inner_band(scene), n - 1))
    xs.append(1.0)
    verts = [(x, 1.0 if i % 2 == 0 else 0.0) for i, x in enumerate(xs)]
    sw = len(verts)
    verts.append((0.0, 0.0))
    east = len(verts)
    verts.append((1.0, 0.0) if n % 2 == 0 else (1.0, 1.0))
    tris = [(sw, 1, 0)]
    tris += [(i - 1, i, i + 1) for i in range(1, n)]
    tris.append((n - 1, n, east))
    return build_terrain(verts, [0.0] * len(verts), tris)


def _inner_band(scene: PlanarGridScene):
    lo, hi = float(scene.line_x[0]), float(scene.line_x[-1])
    if hi <= lo:
        hi = min(lo + 0.1, 0.999)
    return lo, hi


# ---------------------------------------------------------------- farming


def _guard_m(n: int, m: int, C0) -> None:
    """Enforce ``m <= C0 * n``; ``C0=None`` switches the guard off."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    if C0 is not None and m > C0 * n:
        raise TooManySitesForRidgeWidth(f"m={m} exceeds {C0}*n={C0 * n}; the scenes assume m = O(n)")


def gen_farming(n: int, m: int, c=DEFAULT_C, w=DEFAULT_W, C0=DEFAULT_C0) -> ConstructionScene:
    """Farms of side ``1/(c sqrt m)`` down the west wall, gaps twice the side."""
    _guard_m(n, m, C0)
    if c < 2:
        raise ValueError("c must be >= 2")
    c, w = _num(c), _num(w)
    side = inv_sqrt(m) / c
    count = int(math.floor(float(c) * math.sqrt(m) / 3 + 1e-9))
    farms = []
    for j in range(count):
        top = 1 - 3 * side * j
        ent = Point2(side, top - side)
        farms.append(
            Farm(j, Point2(0, top), side, ent, Point2(w, ent.y), w - side, row=j, col=0)
        )
    return ConstructionScene("farming", m, n, c, w, farms, RidgeBlock(w, n, c))


def farming_noninterference(scene: ConstructionScene) -> bool:
    """Check ``2/(c sqrt m) >= sqrt(2)/(c sqrt m) + 1/(c 2^n)`` in exact arithmetic.

    Equivalent to ``4^n (6 - 4 sqrt 2) >= m``; ``sqrt 2`` is replaced by a
    rational upper bound so the test can only err on the safe side.
    """
    sqrt2_hi = Fraction(14142136, 10**7)
    return Fraction(4) ** scene.n * (6 - 4 * sqrt2_hi) >= scene.m


# ---------------------------------------------------------------- industrial


class RoadGeometry(NamedTuple):
    alpha_a: object
    alpha_b: object
    alpha_c: object
    alpha_d: object
    exit: Point2
    length: object


def road_geometry(i: int, m: int, w=DEFAULT_W, x_i=None, entrance_y=0) -> RoadGeometry:
    """Road of the ``i``-th farm in a row: south, west, south, east to the ridge."""
    w = _num(w)
    s = inv_sqrt(m)
    if x_i is None:
        x_i = (2 * i + 1) * s
    a = Fraction(i, m)
    b = (x_i + a) / 2
    c = s - 2 * a
    if c < 0:
        raise NegativeSegment(f"alpha_c = {float(c)} < 0 for i={i}, m={m}")
    d = w - (x_i - b)
    if d < 0:
        raise NegativeSegment(f"alpha_d = {float(d)} < 0 for i={i}, m={m}, w={float(w)}")
    exit_pt = Point2(x_i - b + d, entrance_y - a - c)
    return RoadGeometry(a, b, c, d, exit_pt, a + b + c + d)


def gen_industrial(n: int, m: int, w=DEFAULT_W, C0=DEFAULT_C0) -> ConstructionScene:
    """``M x M`` farms of side ``1/sqrt m`` (``M = floor(sqrt(m)/4)``), equal-length roads."""
    _guard_m(n, m, C0)
    w = _num(w)
    M = math.isqrt(m) // 4
    if M < 1:
        raise ValueError("industrial farming needs m >= 16")
    s = inv_sqrt(m)
    if w <= (2 * M - 1) * s:
        raise ValueError("the ridge must lie east of every farm")
    farms = []
    for row in range(M):
        top = 1 - 3 * s * row
        for col in range(M):
            ent = Point2((2 * col + 1) * s, top - s)
            g = road_geometry(col, m, w, ent.x, ent.y)
            farms.append(
                Farm(row * M + col, Point2(2 * col * s, top), s, ent, g.exit, g.length, row, col)
            )
    return ConstructionScene("industrial", m, n, 1, w, farms, RidgeBlock(w, n, 1), grid_size=M)


# ---------------------------------------------------------------- metric


def construction_geodesic(scene: ConstructionScene, p, target: int | None = None) -> float:
    """Plateau distance from ``p`` (inside a farm) to the exit of farm ``target``.

    Straight to the entrance, along the road, then along the first ridge to
    the target exit.  ``target`` defaults to the farm containing ``p``.
    """
    f = int(scene.farm_of([p])[0])
    if f < 0:
        raise OffPlateau(f"point {tuple(p)} is not on a farm")
    farm = scene.farms[f]
    d = math.hypot(p[0] - float(farm.entrance.x), p[1] - float(farm.entrance.y))
    d += float(farm.road_length)
    if target is not None and target != f:
        d += abs(float(scene.farms[target].exit.y) - float(farm.exit.y))
    return d


@dataclass(frozen=True)
class DominationRecord:
    farm: int
    point: Point2
    r: float
    alive: bool


@dataclass
class EliminationResult:
    records: list[DominationRecord]
    discarded_forbidden: int
    discarded_ridge: int
    entrance_distance: np.ndarray  # per farm, nan where empty

    @property
    def alive_count(self) -> int:
        return sum(r.alive for r in self.records)

    @property
    def occupied_count(self) -> int:
        return len(self.records)


def dominating_points(scene: ConstructionScene, sample):
    """Per farm: index of its sample point closest to the entrance, and that distance."""
    sample = np.asarray(sample, float).reshape(-1, 2)
    fid = scene.farm_of(sample)
    F = scene.farm_count
    ent = scene.entrances
    keep = np.flatnonzero(fid >= 0)
    d = np.hypot(*(sample[keep] - ent[fid[keep]]).T)
    best = np.full(F, np.inf)
    np.minimum.at(best, fid[keep], d)
    who = np.full(F, -1, dtype=np.int64)
    # first (lowest sample index) point achieving the minimum
    hit = d == best[fid[keep]]
    for idx, f in zip(keep[hit][::-1].tolist(), fid[keep][hit][::-1].tolist()):
        who[f] = idx
    return who, best, fid


def simulate_elimination(scene: ConstructionScene, sample) -> EliminationResult:
    """Dominating point of every occupied farm and whether any rival eliminates it.

    A rival farm's dominating point ``q`` eliminates ``p`` when
    ``d(q, e_q) + |e_q - e_p| < d(p, e_p)``, the ridge distance between exits
    being their north-south separation.  Points off the farms are discarded.
    """
    sample = np.asarray(sample, float).reshape(-1, 2)
    who, best, fid = dominating_points(scene, sample)
    ridge = scene.ridge_block
    off = fid < 0
    on_ridge = off & (sample[:, 0] >= float(ridge.x_position)) & (
        sample[:, 0] <= float(ridge.x_position) + ridge.projected_width
    )
    roads = np.array([float(f.road_length) for f in scene.farms])
    occupied = np.flatnonzero(who >= 0)
    ey = scene.exit_y
    to_exit = best[occupied] + roads[occupied]
    rival = to_exit[None, :] + np.abs(ey[occupied][:, None] - ey[occupied][None, :])
    np.fill_diagonal(rival, np.inf)
    alive = ~(rival < to_exit[:, None]).any(axis=1)
    records = [
        DominationRecord(int(f), Point2(*map(float, sample[who[f]])), float(d), bool(a))
        for f, d, a in zip(occupied.tolist(), to_exit.tolist(), alive.tolist())
    ]
    ent = np.where(np.isfinite(best), best, np.nan)
    return EliminationResult(records, int(off.sum() - on_ridge.sum()), int(on_ridge.sum()), ent)


def estimated_complexity(records, n: int) -> int:
    """Each alive cell spans the ridge block (2n crossings) and adds one cell."""
    alive = sum(1 for r in records if r.alive)
    return alive * 2 * n + alive


# ---------------------------------------------------------------- closed forms


def entrance_cdf_union_bound(m: int, s: float) -> float:
    """``m s^2 pi / 4``: bound on Prob[r(f) <= s]."""
    return m * s * s * math.pi / 4


def quarter_disk_in_square(s: float, a: float) -> float:
    """Area of the quarter disk of radius ``s`` at a corner, clipped to a square of side ``a``."""
    if s <= 0:
        return 0.0
    if s <= a:
        return math.pi * s * s / 4
    if s >= a * math.sqrt(2):
        return a * a
    t = math.sqrt(s * s - a * a)
    # two strips of width t and the arc region between them
    theta = math.acos(a / s)
    return a * t + s * s * (math.pi / 4 - theta)


def entrance_cdf_exact(m: int, s: float) -> float:
    """Prob[r(f) <= s] for ``m`` uniform sites and a farm of side ``1/sqrt m``."""
    p = quarter_disk_in_square(s, 1 / math.sqrt(m))
    return 1.0 - (1.0 - p) ** m


def no_elimination_bound(m: int, r: float, i: int, X_i: int) -> float:
    """Lower bound on the chance that none of ``X_i`` points ``i`` farms away eliminates ``p``."""
    gap = r - i / m
    if gap <= 0 or X_i == 0:
        return 1.0
    return math.exp(-m * gap * gap * math.pi * X_i / 2)


def survival_given_counts(m: int, r: float, X, Y) -> float:
    """Product of the per-farm bounds for north counts ``X`` and south counts ``Y``."""
    top = int(math.floor(r * m))
    total = 0.0
    for i in range(1, top + 1):
        xi = X[i - 1] if i - 1 < len(X) else 0
        yi = Y[i - 1] if i - 1 < len(Y) else 0
        total += (r - i / m) ** 2 * math.pi * (xi + yi) / 2
    return math.exp(-m * total)


def alive_bound(m: int, r: float) -> float:
    return 0.5 * math.exp(-2 * r**3 * m * m)


def alive_probability_floor(m: int) -> float:
    return math.pi / (8 * math.e**2 * m ** (1 / 3))


def exp_markov_bound(mu: float) -> float:
    return math.exp(-2 * mu) / 2


def probability_kernels(m: int, r: float, i: int = 1, X_i: int = 1) -> dict[str, float]:
    return {
        "entrance_cdf_bound": entrance_cdf_union_bound(m, r),
        "no_elimination": no_elimination_bound(m, r, i, X_i),
        "alive_bound": alive_bound(m, r),
        "alive_floor": alive_probability_floor(m),
        "markov_exp": exp_markov_bound(r),
    }
