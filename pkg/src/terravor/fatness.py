"""Voronoi cells of uniform samples on the unit torus: shape and tail statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .experiments import map_trials, trial_rng
from .geom_core import Point2

CHEB_TOL = 1e-9
TAIL_J = tuple(range(4, 11))
BAND_I = tuple(range(4, 11))


class CellTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class TorusVoronoiCell:
    site: Point2
    polygon: list[Point2]
    m: int

    @property
    def vertices(self) -> np.ndarray:
        return np.asarray(self.polygon, float)

    @property
    def area(self) -> float:
        return polygon_area(self.vertices)

    @property
    def diameter(self) -> float:
        return polygon_diameter(self.vertices)


class FatnessRecord(NamedTuple):
    diameter: float
    R: float
    r: float
    fatness: float


class Circle(NamedTuple):
    x: float
    y: float
    radius: float


# ---------------------------------------------------------------- polygons


def polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def polygon_diameter(poly: np.ndarray) -> float:
    d = poly[:, None, :] - poly[None, :, :]
    return float(np.sqrt((d**2).sum(axis=2).max()))


def clip_halfplane(poly: np.ndarray, n: np.ndarray, b: float) -> np.ndarray:
    """Part of a convex polygon with ``n . x <= b``."""
    if len(poly) == 0:
        return poly
    s = poly @ n - b
    inside = s <= 0
    if inside.all():
        return poly
    if not inside.any():
        return poly[:0]
    out = []
    k = len(poly)
    for i in range(k):
        j = (i + 1) % k
        if inside[i]:
            out.append(poly[i])
        if inside[i] != inside[j]:
            t = s[i] / (s[i] - s[j])
            out.append(poly[i] + t * (poly[j] - poly[i]))
    return np.array(out)


def _bisector(p: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, float]:
    n = q - p
    return n, float(n @ (p + q) / 2)


def _cell_from_offsets(p: np.ndarray, offsets: np.ndarray, half: float) -> tuple[np.ndarray, bool]:
    """Clip a box of half-width ``half`` by bisectors with ``p + offsets`` (nearest first).

    Returns the polygon and whether clipping stopped because every remaining
    site is beyond twice the farthest vertex (the cell is then final).
    """
    poly = p + half * np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], float)
    dist = np.hypot(offsets[:, 0], offsets[:, 1])
    order = np.argsort(dist, kind="stable")
    for k in order.tolist():
        reach = 2 * np.sqrt(((poly - p) ** 2).sum(axis=1).max())
        if dist[k] > reach:
            return poly, True
        if dist[k] == 0:
            continue
        n, b = _bisector(p, p + offsets[k])
        poly = clip_halfplane(poly, n, b)
    return poly, False


def torus_cell(sample, index: int, replicas: int | None = None) -> TorusVoronoiCell:
    """Voronoi cell of ``sample[index]`` on the unit torus.

    Sites are replicated into the ``replicas x replicas`` block of translated
    unit squares (3, or 5 when ``m <= 4``) and the central copy's planar cell
    is cut out by bisector half-planes.  Minimum-image neighbours are tried
    first; that gives the same cell whenever it is small.
    """
    pts = np.asarray(sample, float).reshape(-1, 2)
    m = len(pts)
    if m < 2:
        raise ValueError("need at least two sites")
    if replicas is None:
        replicas = 5 if m <= 4 else 3
    if replicas % 2 != 1 or replicas < 3:
        raise ValueError("replicas must be odd and >= 3")
    p = pts[index]
    others = np.delete(pts, index, axis=0)
    near = (others - p + 0.5) % 1.0 - 0.5
    poly, done = _cell_from_offsets(p, near, 0.5)
    if not done or 2 * np.sqrt(((poly - p) ** 2).sum(axis=1).max()) >= 0.5:
        h = replicas // 2
        shifts = np.array([(i, j) for i in range(-h, h + 1) for j in range(-h, h + 1)], float)
        offs = (pts[None, :, :] + shifts[:, None, :]).reshape(-1, 2) - p
        offs = offs[np.hypot(offs[:, 0], offs[:, 1]) > 0]
        poly, _ = _cell_from_offsets(p, offs, h + 0.5)
    diam = polygon_diameter(poly)
    far = float(np.sqrt(((poly - p) ** 2).sum(axis=1).max()))
    if replicas == 3 and diam >= 0.5:
        raise CellTooLarge(f"cell diameter {diam:.4g} >= 1/2; replication may be insufficient")
    if replicas > 3 and far >= (replicas // 2) / 2:
        raise CellTooLarge(f"cell reaches {far:.4g} from its site; replication insufficient")
    return TorusVoronoiCell(Point2(float(p[0]), float(p[1])), [Point2(float(x), float(y)) for x, y in poly], m)


# ---------------------------------------------------------------- radii


def smallest_enclosing_circle(points) -> Circle:
    """Minimum enclosing circle (randomised incremental, fixed shuffle)."""
    pts = np.asarray(points, float).reshape(-1, 2)
    pts = pts[np.random.default_rng(0).permutation(len(pts))]
    eps = 1e-12

    def inside(c, q):
        return math.hypot(q[0] - c[0], q[1] - c[1]) <= c[2] * (1 + eps) + eps

    def two(a, b):
        return ((a[0] + b[0]) / 2, (a[1] + b[1]) / 2, math.hypot(a[0] - b[0], a[1] - b[1]) / 2)

    def three(a, b, c):
        d = 2 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
        if d == 0:
            cands = [two(a, b), two(a, c), two(b, c)]
            return max(cands, key=lambda k: k[2])
        a2, b2, c2 = a @ a, b @ b, c @ c
        ux = (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d
        uy = (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d
        return (ux, uy, math.hypot(a[0] - ux, a[1] - uy))

    c = (pts[0][0], pts[0][1], 0.0)
    for i in range(1, len(pts)):
        if inside(c, pts[i]):
            continue
        c = (pts[i][0], pts[i][1], 0.0)
        for j in range(i):
            if inside(c, pts[j]):
                continue
            c = two(pts[i], pts[j])
            for k in range(j):
                if not inside(c, pts[k]):
                    c = three(pts[i], pts[j], pts[k])
    return Circle(float(c[0]), float(c[1]), float(c[2]))


def _edge_constraints(poly: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit outward normals ``n`` and offsets ``b`` with ``n . x <= b`` inside (CCW polygon)."""
    e = np.roll(poly, -1, axis=0) - poly
    n = np.column_stack([e[:, 1], -e[:, 0]])
    L = np.hypot(n[:, 0], n[:, 1])
    keep = L > 0
    n = n[keep] / L[keep, None]
    return n, np.einsum("ij,ij->i", n, poly[keep])


def chebyshev_center(poly, tol: float = CHEB_TOL) -> Circle:
    """Largest inscribed circle of a convex polygon by bisection on the radius."""
    poly = np.asarray(poly, float)
    if polygon_area(poly) < 0:
        poly = poly[::-1]
    n, b = _edge_constraints(poly)
    lo, hi = 0.0, polygon_diameter(poly) / 2
    best = poly.mean(axis=0)
    while hi - lo > tol:
        t = (lo + hi) / 2
        shrunk = poly
        for ni, bi in zip(n, b):
            shrunk = clip_halfplane(shrunk, ni, bi - t)
            if len(shrunk) == 0:
                break
        if len(shrunk):
            lo, best = t, shrunk.mean(axis=0)
        else:
            hi = t
    return Circle(float(best[0]), float(best[1]), lo)


def cell_fatness(cell) -> FatnessRecord:
    """Enclosing radius ``R``, inscribed radius ``r`` and their ratio."""
    poly = cell.vertices if isinstance(cell, TorusVoronoiCell) else np.asarray(cell, float)
    R = smallest_enclosing_circle(poly).radius
    r = chebyshev_center(poly).radius
    if r <= 0:
        raise ValueError("degenerate cell with empty interior")
    return FatnessRecord(polygon_diameter(poly), R, r, R / r)


# ---------------------------------------------------------------- tail laws


def tail_radius(j: int, m: int) -> float:
    """``R_j = 4 * 3**(-1/4) * sqrt(j / (m - 1))``."""
    return 4 * 3**-0.25 * math.sqrt(j / (m - 1))


def tail_bound(j: int) -> float:
    return 6 * math.exp(1 - j)


def band_radius(i: int, m: int) -> float:
    """``r_i = sqrt(1 / (i (m - 1) pi))``."""
    return math.sqrt(1 / (i * (m - 1) * math.pi))


def torus_offsets(sample, index: int) -> np.ndarray:
    pts = np.asarray(sample, float)
    return (np.delete(pts, index, axis=0) - pts[index] + 0.5) % 1.0 - 0.5


def second_nn_distance(sample, index: int = 0) -> float:
    d = np.hypot(*torus_offsets(sample, index).T)
    return float(np.partition(d, 1)[1])


def _fatness_trial(args):
    m, seed, t, all_cells = args
    pts = trial_rng(seed, m, t).random((m, 2))
    idx = range(m) if all_cells else (0,)
    return [(t, cell_fatness(torus_cell(pts, i))) for i in idx]


def fatness_trials(m: int, trials: int, seed: int, all_cells: bool = False, jobs: int | None = 1):
    """``(trial, FatnessRecord)`` for the first site's cell (or every cell) of each trial."""
    out = map_trials(_fatness_trial, [(m, seed, t, all_cells) for t in range(trials)], jobs)
    return [rec for chunk in out for rec in chunk]


def _diameter_trial(args):
    m, seed, t = args
    pts = trial_rng(seed, m, t).random((m, 2))
    return torus_cell(pts, 0).diameter


def cell_diameters(m: int, trials: int, seed: int, jobs: int | None = 1) -> np.ndarray:
    return np.array(map_trials(_diameter_trial, [(m, seed, t) for t in range(trials)], jobs))


def diameter_tail_check(m: int, trials: int, j: int, seed: int, jobs: int | None = 1) -> tuple[float, float]:
    """Fraction of trials whose first cell is wider than ``R_j``, and ``6 e^(1-j)``."""
    if j < 2:
        raise ValueError("j must be >= 2")
    d = cell_diameters(m, trials, seed, jobs)
    return float(np.mean(d > tail_radius(j, m))), tail_bound(j)


class TailRow(NamedTuple):
    j: int
    R_j: float
    bound: float
    empirical: float


def diameter_tails(m: int, trials: int, seed: int, js=TAIL_J, jobs: int | None = 1) -> list[TailRow]:
    d = cell_diameters(m, trials, seed, jobs)
    return [TailRow(j, tail_radius(j, m), tail_bound(j), float(np.mean(d > tail_radius(j, m)))) for j in js]


class BandFrequency(NamedTuple):
    i: int
    frequency: float
    bound: float
    sigma: float


def second_nn_check(m: int, trials: int, seed: int, bands=BAND_I) -> list[BandFrequency]:
    """Frequency of the first site's second-nearest distance in each ``[r_{i+1}, r_i]``."""
    if m < 3:
        raise ValueError("m must be >= 3")
    x = np.array([second_nn_distance(trial_rng(seed, m, t).random((m, 2))) for t in range(trials)])
    out = []
    for i in bands:
        f = float(np.mean((x >= band_radius(i + 1, m)) & (x <= band_radius(i, m))))
        b = 1 / i**2
        out.append(BandFrequency(i, f, b, math.sqrt(b * (1 - b) / trials)))
    return out


def inscribed_witness(sample, index: int = 0) -> Circle:
    """Disk of radius ``r_{i+1}/4`` whose centre sits ``r_{i+1}/4`` from the site, away from its nearest neighbour."""
    pts = np.asarray(sample, float)
    m = len(pts)
    off = torus_offsets(pts, index)
    d = np.hypot(off[:, 0], off[:, 1])
    order = np.argsort(d)
    x2 = d[order[1]]
    i = int(math.floor(1 / ((m - 1) * math.pi * x2**2)))
    rho = band_radius(i + 1, m) / 4
    u = -off[order[0]] / d[order[0]]
    c = pts[index] + rho * u
    return Circle(float(c[0]), float(c[1]), rho)


def disk_in_polygon(circle: Circle, poly, tol: float = 1e-12) -> bool:
    poly = np.asarray(poly, float)
    if polygon_area(poly) < 0:
        poly = poly[::-1]
    n, b = _edge_constraints(poly)
    slack = b - n @ np.array([circle.x, circle.y])
    return bool(np.all(slack >= circle.radius - tol))


def inscribed_witness_check(sample, index: int = 0) -> bool:
    """Whether the witness disk lies inside the site's torus cell."""
    return disk_in_polygon(inscribed_witness(sample, index), torus_cell(sample, index).vertices)


@dataclass(frozen=True)
class DistributionSpec:
    """``kind`` is ``"constant"`` or any ``numpy.random.Generator`` method name."""

    kind: str
    params: tuple = ()

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "constant":
            return np.full(size, float(self.params[0]))
        return getattr(rng, self.kind)(*self.params, size=size)


def markov_exp_check(dist: DistributionSpec, trials: int, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo ``E[exp(-X)]`` against ``exp(-2 mu) / 2`` with ``mu`` the sample mean."""
    x = dist.sample(np.random.default_rng(seed), trials)
    if np.any(x <= 0):
        raise ValueError("the variable must be positive")
    return float(np.mean(np.exp(-x))), math.exp(-2 * float(np.mean(x))) / 2
