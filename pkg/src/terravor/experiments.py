"""Samplers, grid-cell contributor counts and complexity scaling runs.

Every trial draws from its own generator seeded by ``(seed, row, trial)``, so
results do not depend on how trials are spread over worker processes.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.spatial import Delaunay

from . import constructions as con
from .geodesic import build_geodesic_graph, DistanceField
from .geom_core import TriangulatedTerrain, build_terrain, grid_terrain
from .voronoi import cell_label_counts, complexity_report, voronoi_labeling

log = logging.getLogger(__name__)

KINDS = ("planar", "farming", "industrial", "realistic")


class GridTooCoarse(ValueError):
    pass


@dataclass(frozen=True)
class ScalingRow:
    kind: str
    n: int
    m: int
    trials: int
    mean_complexity: float
    std_err: float
    seed: int


@dataclass(frozen=True)
class GridCellStats:
    cell_x: int
    cell_y: int
    contributor_count: int


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    stderr: float
    intercept: float


def trial_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))


def sample_domain_uniform(m: int, seed) -> np.ndarray:
    """``m`` i.i.d. uniform points in the unit square; ``seed`` may be a Generator."""
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.random((m, 2))


def sample_surface_uniform(terrain: TriangulatedTerrain, m: int, seed) -> np.ndarray:
    """Projections of ``m`` points uniform on the lifted surface."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    w = terrain.lifted_areas
    t = rng.choice(len(w), size=m, p=w / w.sum())
    u = rng.random((m, 2))
    flip = u.sum(axis=1) > 1
    u[flip] = 1 - u[flip]
    p = terrain.xy[terrain.tris[t]]
    return p[:, 0] + u[:, :1] * (p[:, 1] - p[:, 0]) + u[:, 1:] * (p[:, 2] - p[:, 0])


def grid_contributors(field: DistanceField, m: int) -> list[GridCellStats]:
    """Distinct labels seen in each cell of the ``sqrt(m) x sqrt(m)`` grid."""
    g = max(1, int(round(math.sqrt(m))))
    counts = cell_label_counts(field, g)
    if len(counts) < g * g:
        missing = next((i, j) for i in range(g) for j in range(g) if (i, j) not in counts)
        raise GridTooCoarse(f"grid cell {missing} contains no lattice node")
    return [GridCellStats(i, j, counts[(i, j)]) for i in range(g) for j in range(g)]


def annulus_series(terms: int = 12) -> float:
    """``(3 pi / 2) * sum_{i>2} 4^(i-1) exp(-4^(i-3))`` by direct summation."""
    return 1.5 * math.pi * sum(4.0 ** (i - 1) * math.exp(-(4.0 ** (i - 3))) for i in range(3, 3 + terms))


def contributor_terrain(m: int) -> tuple[TriangulatedTerrain, int]:
    """Flat grid mesh plus refinement giving ~8 lattice steps per contributor cell."""
    g = max(1, int(round(math.sqrt(m))))
    mesh = max(2, min(g, 64))
    k = max(1, math.ceil(8 * g / mesh) - 1)
    return grid_terrain(mesh), k


def random_delaunay_terrain(n: int, seed, xi_target: float = 2.0) -> TriangulatedTerrain:
    """Delaunay mesh of ``n`` uniform points plus the corners, i.i.d. heights scaled to slope ``xi_target``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pts = np.vstack([[[0, 0], [1, 0], [1, 1], [0, 1]], rng.random((n, 2))])
    tri = Delaunay(pts).simplices
    z = rng.random(len(pts))
    raw = build_terrain(pts, z, tri)
    xi = float(raw.slopes.max())
    scale = xi_target / xi if xi > 0 else 0.0
    return build_terrain(pts, z * scale, raw.tris)


def fit_loglog(ms, means) -> ExponentFit:
    """Ordinary least squares of ``log(mean)`` on ``log(m)``."""
    x = np.log(np.asarray(ms, float))
    y = np.log(np.asarray(means, float))
    if len(x) < 2:
        raise ValueError("need at least two ladder points")
    res = stats.linregress(x, y)
    return ExponentFit(float(res.slope), float(res.stderr), float(res.intercept))


# ---------------------------------------------------------------- trials


def _construction_trial(args):
    kind, n, m, c, w, C0, seed, row, trial = args
    scene = _scene(kind, n, m, c, w, C0)
    rng = trial_rng(seed, row, trial)
    res = con.simulate_elimination(scene, sample_domain_uniform(m, rng))
    return con.estimated_complexity(res.records, n), res.alive_count, res.occupied_count


_SCENES: dict = {}


def _scene(kind, n, m, c, w, C0):
    key = (kind, n, m, c, w, C0)
    if key not in _SCENES:
        if kind == "farming":
            _SCENES[key] = con.gen_farming(n, m, c, w, C0)
        else:
            _SCENES[key] = con.gen_industrial(n, m, w, C0)
    return _SCENES[key]


def _realistic_trial(args):
    n, m, refine, xi_target, seed, row, trial = args
    rng = trial_rng(seed, row, trial)
    terrain = random_delaunay_terrain(n, rng, xi_target)
    sites = sample_domain_uniform(m, rng)
    field = voronoi_labeling(build_geodesic_graph(terrain, refine), sites)
    rep = complexity_report(field)
    return rep.complexity, rep.voronoi_vertex_count, m


def map_trials(fn, tasks, jobs):
    """Map ``fn`` over ``tasks`` in order, on ``jobs`` worker processes (``None``: all cores)."""
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def _row(kind, n, m, values, seed) -> ScalingRow:
    v = np.asarray(values, float)
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
    return ScalingRow(kind, n, m, len(v), float(v.mean()), se, seed)


def scaling_experiment(
    kind: str,
    ladder,
    trials: int,
    seed: int,
    c=con.DEFAULT_C,
    w=con.DEFAULT_W,
    C0=None,
    refine: int = 3,
    xi_target: float = 2.0,
    jobs: int | None = 1,
    extra: dict | None = None,
) -> tuple[list[ScalingRow], ExponentFit | None]:
    """Mean complexity per ``(n, m)`` ladder point and the log-log slope in ``m``.

    ``C0`` is the ``m <= C0 * n`` guard handed to the scene generators; it is
    off by default because scaling ladders run ``m`` far past ``n``.
    ``extra`` (if given) collects per-trial side data: ``alive``,
    ``occupied`` for construction scenes and ``vertex_counts`` for realistic
    terrains.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ladder = [(int(n), int(m)) for n, m in ladder]
    rows = []
    for r, (n, m) in enumerate(ladder):
        if kind == "planar":
            vals = [con.gen_planar_grid(n, m).overlay_count] * trials
        elif kind in ("farming", "industrial"):
            out = map_trials(_construction_trial, [(kind, n, m, c, w, C0, seed, r, t) for t in range(trials)], jobs)
            vals = [o[0] for o in out]
            if extra is not None:
                extra.setdefault("alive", {})[(n, m)] = [o[1] for o in out]
                extra.setdefault("occupied", {})[(n, m)] = [o[2] for o in out]
        else:
            out = map_trials(_realistic_trial, [(n, m, refine, xi_target, seed, r, t) for t in range(trials)], jobs)
            vals = [o[0] for o in out]
            if extra is not None:
                extra.setdefault("vertex_counts", {})[(n, m)] = [(o[1], o[2]) for o in out]
        rows.append(_row(kind, n, m, vals, seed))
        log.info("%s n=%d m=%d mean=%.4g", kind, n, m, rows[-1].mean_complexity)
    fit = None
    if len({m for _, m in ladder}) >= 2:
        fit = fit_loglog([row.m for row in rows], [row.mean_complexity for row in rows])
    return rows, fit


def grid_experiment(m: int, trials: int, seed: int):
    """Per-trial contributor counts on the flat square: yields ``(trial, stats, field)``."""
    terrain, k = contributor_terrain(m)
    graph = build_geodesic_graph(terrain, k)
    for t in range(trials):
        sites = sample_domain_uniform(m, trial_rng(seed, 0, t))
        field = voronoi_labeling(graph, sites)
        yield t, grid_contributors(field, m), field


def contributor_tail(counts, thresholds) -> list[float]:
    counts = np.asarray(counts)
    return [float(np.mean(counts >= t)) for t in thresholds]
