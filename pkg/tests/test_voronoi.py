import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial import Voronoi

from terravor.experiments import random_delaunay_terrain
from terravor.geodesic import build_geodesic_graph
from terravor.geom_core import flat_square, grid_terrain, segments_intersect
from terravor.input_models import low_density_estimate, slope_bound
from terravor.voronoi import (
    complexity_report,
    consolidate_labels,
    count_chord_edge_crossings,
    count_voronoi_vertices,
    disconnected_cells,
    edge_crossings,
    euler_audit,
    interior_edge_mask,
    label_boundary_segments,
    voronoi_labeling,
)

# regression constant: bisector polyline density stays below C * xi
BISECTOR_DENSITY_C = 8.0


def planar_vertex_oracle(sites) -> int:
    """Vertices of the exact planar Voronoi diagram strictly inside the unit square."""
    if len(sites) < 3:
        return 0
    v = Voronoi(sites).vertices
    return int(np.sum((v > 0).all(axis=1) & (v < 1).all(axis=1)))


def planar_crossing_oracle(terrain, sites, samples: int = 20000) -> int:
    """Nearest-site changes along interior edges, by dense brute-force sampling."""
    total = 0
    s = np.linspace(0, 1, samples)
    for (u, v), ts in terrain.edge_triangles.items():
        if len(ts) < 2:
            continue
        p = terrain.xy[u] + s[:, None] * (terrain.xy[v] - terrain.xy[u])
        lab = np.argmin(((p[:, None, :] - sites[None]) ** 2).sum(axis=2), axis=1)
        total += int(np.count_nonzero(lab[1:] != lab[:-1]))
    return total


def test_one_site_single_cell():
    f = voronoi_labeling(grid_terrain(3), [(0.4, 0.4)], 3)
    assert (f.label == 0).all()
    assert count_chord_edge_crossings(f) == 0
    assert count_voronoi_vertices(f) == 0


def test_two_sites_half_planes():
    f = voronoi_labeling(grid_terrain(4), [(0.2, 0.5), (0.8, 0.5)], 4)
    x = f.graph.nodes[:, 0]
    assert (f.label[x < 0.5] == 0).all() and (f.label[x > 0.5] == 1).all()
    assert count_voronoi_vertices(f) == 0


def test_two_sites_crossings_equal_edges_cut_by_bisector():
    t = grid_terrain(5)
    a, b = np.array([0.13, 0.21]), np.array([0.71, 0.64])
    f = voronoi_labeling(t, [a, b], 4)
    # the bisector clipped to a long segment through the square
    mid, d = (a + b) / 2, np.array([-(b - a)[1], (b - a)[0]])
    p, q = mid - 3 * d, mid + 3 * d
    expected = sum(
        segments_intersect(t.xy[u], t.xy[v], p, q)
        for (u, v), ts in t.edge_triangles.items()
        if len(ts) == 2
    )
    assert count_chord_edge_crossings(f) == expected


def test_equilateral_sites_one_vertex():
    c = np.array([0.5, 0.5])
    sites = [c + 0.3 * np.array([math.cos(a), math.sin(a)]) for a in (0.3, 0.3 + 2 * math.pi / 3, 0.3 + 4 * math.pi / 3)]
    f = voronoi_labeling(grid_terrain(6), sites, 4)
    assert count_voronoi_vertices(f) == 1
    # three sectors around the circumcentre
    near = np.linalg.norm(f.graph.nodes[:, :2] - c, axis=1) < 0.1
    assert set(f.label[near].tolist()) == {0, 1, 2}


def test_ten_random_sites_match_exact_vertex_count():
    t = grid_terrain(8)
    g = build_geodesic_graph(t, 6)
    hits = 0
    for s in range(100):
        sites = np.random.default_rng(s).random((10, 2))
        hits += count_voronoi_vertices(voronoi_labeling(g, sites)) == planar_vertex_oracle(sites)
    assert hits >= 95


@pytest.mark.parametrize("seed", range(5))
def test_flat_counts_match_exact_overlay(seed):
    rng = np.random.default_rng(seed)
    t = grid_terrain(3)
    assert len(t.edges) <= 50
    sites = rng.random((12, 2))
    rep = complexity_report(voronoi_labeling(t, sites, 8))
    assert abs(rep.voronoi_vertex_count - planar_vertex_oracle(sites)) <= 1
    assert abs(rep.chord_edge_crossings - planar_crossing_oracle(t, sites)) <= 2


def test_border_edges_are_excluded():
    t = flat_square()
    f = voronoi_labeling(t, [(0.5, 0.2), (0.5, 0.8)], 3)
    per_edge = edge_crossings(f)
    mask = interior_edge_mask(t)
    assert per_edge[~mask].sum() == 2  # west and east walls
    assert count_chord_edge_crossings(f) == per_edge[mask].sum() == 1


def test_euler_audit_small_cases():
    a = euler_audit(voronoi_labeling(grid_terrain(4), [(0.2, 0.2), (0.8, 0.3), (0.5, 0.9)], 4))
    assert a.ok and a.bound == 4 and a.voronoi_vertex_count <= 4
    a2 = euler_audit(voronoi_labeling(grid_terrain(4), [(0.2, 0.2), (0.8, 0.3)], 4))
    assert a2.bound is None and a2.voronoi_vertex_count == 0 and a2.ok


def test_euler_bound_flat_random_100_trials():
    g = build_geodesic_graph(grid_terrain(10), 4)
    for s in range(100):
        sites = np.random.default_rng(1000 + s).random((100, 2))
        assert euler_audit(voronoi_labeling(g, sites)).ok


def test_euler_bound_on_rough_terrain_graph_mode():
    t = random_delaunay_terrain(300, 5)
    sites = np.random.default_rng(5).random((300, 2))
    rep = complexity_report(voronoi_labeling(t, sites, 3))
    assert rep.voronoi_vertex_count <= 2 * 300 - 2


def test_consolidated_cells_are_connected():
    t = random_delaunay_terrain(200, 8)
    sites = np.random.default_rng(8).random((200, 2))
    f = voronoi_labeling(t, sites, 3)
    g = consolidate_labels(f)
    assert disconnected_cells(g) == []
    # labels only move between neighbouring cells, never appear from nowhere
    assert set(np.unique(g.label)) <= set(np.unique(f.label))


def test_disconnection_rate_drops_with_refinement():
    coarse = fine = 0
    for s in range(3):
        t = random_delaunay_terrain(30, s)
        sites = np.random.default_rng(s).random((20, 2))
        coarse += len(disconnected_cells(voronoi_labeling(build_geodesic_graph(t, 1), sites)))
        fine += len(disconnected_cells(voronoi_labeling(build_geodesic_graph(t, 15), sites)))
    assert fine < coarse


def test_bisector_density_tracks_slope():
    for s in range(10):
        t = random_delaunay_terrain(30, 100 + s)
        sites = np.random.default_rng(s).random((2, 2))
        f = voronoi_labeling(build_geodesic_graph(t, 4), sites)
        lam = low_density_estimate(label_boundary_segments(f))
        assert lam <= BISECTOR_DENSITY_C * slope_bound(t).xi


def test_report_fields():
    t = random_delaunay_terrain(40, 2)
    sites = np.random.default_rng(2).random((15, 2))
    rep = complexity_report(voronoi_labeling(t, sites, 3))
    d = rep.as_dict()
    assert d["breakpoint_bound"] == t.n_vertices == rep.n
    assert d["complexity"] == rep.voronoi_vertex_count + rep.chord_edge_crossings + rep.breakpoint_bound
    assert sum(rep.per_cell_contributors.values()) >= 16
    assert min(rep.voronoi_vertex_count, rep.chord_edge_crossings) >= 0


_GRID = build_geodesic_graph(grid_terrain(4), 3)


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=3, max_size=25, unique=True))
def test_euler_bound_property(pts):
    f = voronoi_labeling(_GRID, pts)
    assert count_voronoi_vertices(f) <= 2 * len(pts) - 2
