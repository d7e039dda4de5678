"""Acceptance criteria, one test each.

Each criterion computes its data once (cached) and renders it to a CSV
string; the determinism criterion recomputes every stochastic one from
scratch and compares bytes.  A PASS/FAIL line per criterion is printed in
the terminal summary.
"""

import csv
import functools
import io
import math
import time

import numpy as np
import pytest

from terravor import constructions as con
from terravor import fatness as fat
from terravor.experiments import (
    annulus_series,
    grid_experiment,
    random_delaunay_terrain,
    sample_domain_uniform,
    scaling_experiment,
    trial_rng,
)
from terravor.geodesic import build_geodesic_graph
from terravor.input_models import check_distance_sandwich, slope_bound
from terravor.voronoi import complexity_report, count_voronoi_vertices, voronoi_labeling

SEED = 20240601
LINES: dict[int, str] = {}


def report(n: int, ok: bool, detail: str, seconds: float) -> None:
    LINES[n] = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}  ({seconds:.1f} s)"


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def binom_sigma(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n)


# ---------------------------------------------------------------- computations


def compute_planar_overlay():
    scene = con.gen_planar_grid(100, 100)
    terrain = con.planar_grid_mesh(scene)
    rep = complexity_report(voronoi_labeling(terrain, scene.sites, 6))
    return scene.overlay_count, rep.chord_edge_crossings, rep.voronoi_vertex_count


def compute_exponents():
    ladder = [(32, 2**k) for k in (8, 10, 12, 14)]
    out = {}
    for kind in ("farming", "industrial"):
        rows, fit = scaling_experiment(kind, ladder, 100, SEED)
        out[kind] = (rows, fit)
    text = to_csv(
        ["kind", "n", "m", "trials", "mean_complexity", "std_err", "seed"],
        [(r.kind, r.n, r.m, r.trials, r.mean_complexity, r.std_err, r.seed) for rows, _ in out.values() for r in rows],
    )
    return out, text


def compute_survival():
    m = 4096
    scene = con.gen_industrial(32, m, C0=None)
    alive = occupied = farms = 0
    rows = []
    t = 0
    while occupied < 10_000:
        res = con.simulate_elimination(scene, sample_domain_uniform(m, trial_rng(SEED, 4, t)))
        alive += res.alive_count
        occupied += res.occupied_count
        farms += scene.farm_count
        rows.append((t, res.occupied_count, res.alive_count))
        t += 1
    return alive, occupied, farms, to_csv(["trial", "occupied", "alive"], rows)


def compute_entrance_law():
    m = 256
    scene = con.gen_industrial(32, m, C0=None)
    r = np.concatenate(
        [con.simulate_elimination(scene, sample_domain_uniform(m, trial_rng(SEED, 5, t))).entrance_distance for t in range(10_000)]
    )
    r = np.where(np.isnan(r), np.inf, r)
    r_sorted = np.sort(r)
    s = np.linspace(0.0, 1 / math.sqrt(m), 201)
    emp = np.searchsorted(r_sorted, s, side="right") / len(r)
    law = np.array([con.entrance_cdf_union_bound(m, x) for x in s])
    exact = np.array([con.entrance_cdf_exact(m, x) for x in s])
    return s, emp, law, exact, to_csv(["s", "empirical", "union_law", "exact_law"], zip(s, emp, law, exact))


def compute_linearity():
    extra = {}
    rows, _ = scaling_experiment("realistic", [(1000, 1000), (4000, 4000)], 20, SEED, refine=3, extra=extra)
    xi = [
        float(random_delaunay_terrain(n, trial_rng(SEED, r, 0)).slopes.max()) for r, (n, _) in enumerate([(1000, 1000), (4000, 4000)])
    ]
    text = to_csv(
        ["n", "m", "trials", "mean_complexity", "std_err", "ratio"],
        [(r.n, r.m, r.trials, r.mean_complexity, r.std_err, r.mean_complexity / (r.n + r.m)) for r in rows],
    )
    return rows, extra["vertex_counts"], xi, text


def compute_contributors():
    counts, vertices, rows = [], [], []
    for t, stats, field in grid_experiment(1024, 100, SEED):
        c = [s.contributor_count for s in stats]
        counts.extend(c)
        v = count_voronoi_vertices(field)
        vertices.append((v, 1024))
        rows.append((t, float(np.mean(c)), max(c), v))
    return counts, vertices, to_csv(["trial", "mean_contributors", "max_contributors", "vertices"], rows)


def compute_sandwich():
    rows, fails = [], 0
    for s in range(20):
        rng = trial_rng(SEED, 8, s)
        t = random_delaunay_terrain(30, rng)
        g = build_geodesic_graph(t, 4)
        beta = slope_bound(t).beta
        worst_lo, worst_hi, bad = math.inf, 0.0, 0
        for _ in range(100):
            w = check_distance_sandwich(g, rng.random(2), rng.random(2), beta, 0.05)
            worst_lo, worst_hi = min(worst_lo, w.lower_ratio), max(worst_hi, w.upper_ratio)
            bad += not w.ok
        fails += bad
        rows.append((s, beta, worst_lo, worst_hi, bad))
    return fails, to_csv(["terrain", "beta", "min_lower_ratio", "max_upper_ratio", "failures"], rows)


def compute_torus_cells():
    m = 1024
    tails = fat.diameter_tails(m, 10_000, SEED, js=(6,))
    bands = fat.second_nn_check(m, 10_000, SEED, bands=range(4, 9))
    witness = []
    for t in range(1000):
        pts = trial_rng(SEED, 10, t).random((m, 2))
        witness.append(fat.inscribed_witness_check(pts, 0))
    means = {mm: float(np.mean([r.fatness for _, r in fat.fatness_trials(mm, 2000, SEED)])) for mm in (256, 1024, 4096)}
    rows = [("tail", r.j, r.R_j, r.bound, r.empirical) for r in tails]
    rows += [("band", b.i, b.frequency, b.bound, b.sigma) for b in bands]
    rows += [("witness", 0, float(np.mean(witness)), 1.0, 0.0)]
    rows += [("fatness", mm, v, 0.0, 0.0) for mm, v in means.items()]
    return tails, bands, witness, means, to_csv(["part", "key", "value", "bound", "extra"], rows)


cached = {f.__name__: functools.cache(f) for f in (
    compute_planar_overlay, compute_exponents, compute_survival, compute_entrance_law,
    compute_linearity, compute_contributors, compute_sandwich, compute_torus_cells,
)}


def timed(name):
    t0 = time.perf_counter()
    out = cached[name]()
    return out, time.perf_counter() - t0


# ---------------------------------------------------------------- criteria


def test_criterion_01_construction_identities():
    t0 = time.perf_counter()
    bad = 0
    for m in (64, 256, 1024):
        s = con.gen_industrial(32, m, C0=None)
        target = 1 / math.sqrt(m) + float(s.w)
        bad += sum(abs(float(f.road_length) - target) > 1e-12 for f in s.farms)
        bad += sum(f.exit.x != s.w for f in s.farms)
        M = s.grid_size
        for row in range(M):
            ey = [s.farms[row * M + j].exit.y for j in range(M)]
            bad += sum(b - a != con.Fraction(1, m) for a, b in zip(ey, ey[1:]))
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 1
    report(1, ok, f"identity violations={bad}", dt)
    assert ok


def test_criterion_02_planar_overlay():
    (exact, crossings, vertices), dt = timed("compute_planar_overlay")
    ok = exact == 9900 and abs(crossings - 9900) <= 0.02 * 9900 and dt < 60
    report(2, ok, f"formula={exact} meshed k=6 crossings={crossings}", dt)
    assert ok


def test_criterion_03_lower_bound_exponents():
    (out, _), dt = timed("compute_exponents")
    f, i = out["farming"][1], out["industrial"][1]
    ok = 0.40 <= f.slope <= 0.60 and 0.55 <= i.slope <= 0.80 and dt < 600
    report(3, ok, f"farming slope={f.slope:.3f}+-{f.stderr:.3f} industrial slope={i.slope:.3f}+-{i.stderr:.3f}", dt)
    assert ok


def test_criterion_04_survival_probability():
    (alive, occupied, farms, _), dt = timed("compute_survival")
    floor = con.alive_probability_floor(4096)
    freq = alive / occupied
    ok = occupied >= 10_000 and freq >= floor - 3 * binom_sigma(floor, occupied) and dt < 300
    report(4, ok, f"alive/occupied={freq:.4f} over {occupied} farms (alive/all farms={alive / farms:.4f}) floor={floor:.5f}", dt)
    assert ok


def test_criterion_05_entrance_distance_law():
    (s, emp, law, exact, _), dt = timed("compute_entrance_law")
    dev = float(np.max(np.abs(emp - law)))
    dev_exact = float(np.max(np.abs(emp - exact)))
    ok = dev <= 0.02 and dt < 60
    report(5, ok, f"sup|F_emp - m s^2 pi/4|={dev:.4f} (limit 0.02); vs 1-(1-pi s^2/4)^m: {dev_exact:.4f}", dt)
    assert ok


def test_criterion_06_upper_bound_linearity():
    (rows, _, xi, _), dt = timed("compute_linearity")
    ratios = [r.mean_complexity / (r.n + r.m) for r in rows]
    q = max(ratios) / min(ratios)
    ok = q < 2 and max(xi) <= 2 + 1e-9 and dt < 900
    report(6, ok, f"complexity/(n+m)={ratios[0]:.3f},{ratios[1]:.3f} factor={q:.3f}", dt)
    assert ok


def test_criterion_07_grid_contributors():
    (counts, _, _), dt = timed("compute_contributors")
    mean = float(np.mean(counts))
    series = annulus_series()
    ok = mean <= 8 and abs(series - 33.26) <= 0.01 and dt < 300
    report(7, ok, f"mean contributors={mean:.3f} annulus series={series:.4f}", dt)
    assert ok


def test_criterion_08_geodesic_sandwich():
    (fails, _), dt = timed("compute_sandwich")
    ok = fails == 0 and dt < 120
    report(8, ok, f"failures={fails} of 2000", dt)
    assert ok


def test_criterion_09_euler_bound():
    t0 = time.perf_counter()
    runs = [(cached["compute_planar_overlay"]()[2], 100)]
    runs += [vc for per in cached["compute_linearity"]()[1].values() for vc in per]
    runs += cached["compute_contributors"]()[1]
    bad = sum(v > 2 * m - 2 for v, m in runs)
    dt = time.perf_counter() - t0
    report(9, bad == 0, f"{len(runs)} Voronoi runs, violations={bad}", dt)
    assert bad == 0


def test_criterion_10_torus_cell_statistics():
    (tails, bands, witness, means, _), dt = timed("compute_torus_cells")
    a = tails[0].empirical <= 0.05
    b = all(x.frequency <= x.bound + 3 * x.sigma for x in bands)
    c = all(witness) and len(witness) == 1000
    d = max(means.values()) / min(means.values()) < 1.5
    ok = a and b and c and d and dt < 600
    detail = (
        f"(a) P[diam>R_6]={tails[0].empirical:.4f} (b) max band excess={max(x.frequency - x.bound for x in bands):.4f} "
        f"(c) witness={np.mean(witness):.3f} (d) mean fatness="
        + ",".join(f"{v:.3f}" for v in means.values())
    )
    report(10, ok, detail, dt)
    assert ok


def test_criterion_11_determinism():
    t0 = time.perf_counter()
    pick = {
        "compute_exponents": lambda o: o[1],
        "compute_survival": lambda o: o[3],
        "compute_entrance_law": lambda o: o[4],
        "compute_linearity": lambda o: o[3],
        "compute_contributors": lambda o: o[2],
        "compute_sandwich": lambda o: o[1],
        "compute_torus_cells": lambda o: o[4],
    }
    differ = [
        name for name, get in pick.items()
        if get(cached[name]()).encode() != get(cached[name].__wrapped__()).encode()
    ]
    dt = time.perf_counter() - t0
    report(11, not differ, f"re-runs with differing CSV bytes: {differ or 'none'}", dt)
    assert not differ
