"""Discrete geodesic Voronoi diagrams and their combinatorial complexity."""

from __future__ import annotations

import logging
from itertools import combinations
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .geodesic import (
    DEFAULT_REFINE,
    DistanceField,
    GeodesicGraph,
    build_geodesic_graph,
    multi_source_field,
)
from .geom_core import Segment2, Point2, TriangulatedTerrain

log = logging.getLogger(__name__)


@dataclass
class VoronoiComplexityReport:
    voronoi_vertex_count: int
    chord_edge_crossings: int
    breakpoint_bound: int
    m: int
    n: int
    per_cell_contributors: dict[tuple[int, int], int] = field(default_factory=dict)
    disconnected_cells: int = 0  # sites whose raw labels split into several pieces

    @property
    def complexity(self) -> int:
        return self.voronoi_vertex_count + self.breakpoint_bound + self.chord_edge_crossings

    def as_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "voronoi_vertex_count": self.voronoi_vertex_count,
            "chord_edge_crossings": self.chord_edge_crossings,
            "breakpoint_bound": self.breakpoint_bound,
            "complexity": self.complexity,
            "euler_bound_ok": euler_bound_holds(self.voronoi_vertex_count, self.m),
            "disconnected_cells": self.disconnected_cells,
        }


@dataclass
class EulerAudit:
    voronoi_vertex_count: int
    m: int
    bound: int | None
    ok: bool
    cell_label_counts: dict[tuple[int, int], int]


def voronoi_labeling(terrain, sites, refinement_k: int = DEFAULT_REFINE) -> DistanceField:
    """Label every graph node with its geodesically nearest site.

    ``terrain`` may be a :class:`TriangulatedTerrain` or an already built
    :class:`GeodesicGraph` (whose own refinement then wins).
    """
    graph = terrain if isinstance(terrain, GeodesicGraph) else build_geodesic_graph(terrain, refinement_k)
    return multi_source_field(graph, sites)


def _lattice_edges(graph: GeodesicGraph) -> np.ndarray:
    rt = graph.refined_triangles
    e = np.sort(np.concatenate([rt[:, [0, 1]], rt[:, [1, 2]], rt[:, [2, 0]]]), axis=1)
    return np.unique(e, axis=0)


def _label_components(n_nodes: int, edges: np.ndarray, label: np.ndarray) -> np.ndarray:
    e = edges[label[edges[:, 0]] == label[edges[:, 1]]]
    adj = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n_nodes, n_nodes))
    return connected_components(adj, directed=False)[1]


def consolidate_labels(field: DistanceField, max_rounds: int = 50) -> DistanceField:
    """Make every label occupy one lattice-connected region.

    For each site only the lattice component holding its closest node is
    kept.  Nodes of the other fragments are absorbed, front by front, by the
    neighbouring label that offers the shortest extended distance.
    """
    graph = field.graph
    edges = _lattice_edges(graph)
    both = np.concatenate([edges, edges[:, ::-1]])
    length = np.linalg.norm(graph.nodes[both[:, 0]] - graph.nodes[both[:, 1]], axis=1)
    label = field.label.copy()
    dist = field.dist.copy()
    for _ in range(max_rounds):
        comp = _label_components(graph.n_nodes, edges, label)
        order = np.lexsort((dist, label))
        first = np.ones(len(order), bool)
        first[1:] = label[order][1:] != label[order][:-1]
        keep = np.zeros(comp.max() + 1, bool)
        keep[comp[order[first]]] = True
        stray = ~keep[comp]
        if not stray.any():
            break
        while stray.any():
            frontier = stray[both[:, 0]] & ~stray[both[:, 1]]
            if not frontier.any():
                break
            u, v = both[frontier, 0], both[frontier, 1]
            cand = dist[v] + length[frontier]
            o = np.lexsort((label[v], cand, u))
            u, v, cand = u[o], v[o], cand[o]
            head = np.ones(len(u), bool)
            head[1:] = u[1:] != u[:-1]
            label[u[head]] = label[v[head]]
            dist[u[head]] = cand[head]
            stray[u[head]] = False
    return replace(field, label=label, dist=dist)


def count_voronoi_vertices(field: DistanceField, graph: GeodesicGraph | None = None, consolidate: bool = True) -> int:
    """Count lattice triangles whose corners carry three different labels.

    Witness triangles that share a lattice node and the same label triple are
    merged into one vertex.  With ``consolidate`` the labels are first made
    lattice-connected, so stray fragments do not add spurious vertices.
    """
    graph = graph or field.graph
    if consolidate:
        field = consolidate_labels(field)
    rt = graph.refined_triangles
    lab = field.label[rt]
    distinct = (lab[:, 0] != lab[:, 1]) & (lab[:, 1] != lab[:, 2]) & (lab[:, 0] != lab[:, 2])
    w = np.flatnonzero(distinct)
    if len(w) == 0:
        return 0
    trip = np.sort(lab[w], axis=1)
    _, key = np.unique(trip, axis=0, return_inverse=True)
    if graph.planar:
        return _count_planar_vertices(field, rt, w)
    key = key.ravel()
    # (key, node) incidences; consecutive equal pairs join their witnesses
    nodes = rt[w].ravel()
    keys = np.repeat(key, 3)
    wit = np.repeat(np.arange(len(w)), 3)
    order = np.lexsort((nodes, keys))
    nodes, keys, wit = nodes[order], keys[order], wit[order]
    same = (nodes[1:] == nodes[:-1]) & (keys[1:] == keys[:-1])
    a, b = wit[:-1][same], wit[1:][same]
    adj = coo_matrix((np.ones(len(a)), (a, b)), shape=(len(w), len(w)))
    n_comp, _ = connected_components(adj, directed=False)
    return int(n_comp)


def _count_planar_vertices(field: DistanceField, rt: np.ndarray, witnesses: np.ndarray) -> int:
    """Exact vertex count near the witness triangles of a planar terrain.

    A short Voronoi edge can fit inside one lattice triangle, whose corner
    labels then form a triple that is not a vertex.  Every triple of labels
    seen on the one-ring of a witness is tested against its equidistant point.
    """
    n_nodes = len(field.label)
    inc = coo_matrix(
        (np.ones(rt.size), (np.repeat(np.arange(len(rt)), 3), rt.ravel())), shape=(len(rt), n_nodes)
    ).tocsr()
    node_tris = inc.T.tocsr()
    found: set[tuple[int, int, int]] = set()
    tested: set[tuple[int, int, int]] = set()
    for w in witnesses.tolist():
        ring = np.unique(node_tris[rt[w]].indices)
        labels = sorted(set(field.label[rt[ring]].ravel().tolist()))
        for t in combinations(labels, 3):
            if t not in tested:
                tested.add(t)
                if _is_planar_vertex(field, t):
                    found.add(t)
    return len(found)


def _is_planar_vertex(field: DistanceField, triple, tol: float = 1e-9) -> bool:
    """Whether the point equidistant from three sites on a planar terrain is a Voronoi vertex."""
    a, b, c = field.graph.terrain.plane
    s = field.site_xyz[list(triple)]
    rows = np.vstack([2 * (s[1:] - s[0]), [a, b, -1.0]])
    rhs = np.append((s[1:] ** 2).sum(axis=1) - (s[0] ** 2).sum(), -c)
    try:
        x = np.linalg.solve(rows, rhs)
    except np.linalg.LinAlgError:
        return False
    if not ((x[:2] >= -tol).all() and (x[:2] <= 1 + tol).all()):
        return False
    r = np.linalg.norm(x - s[0])
    d, _ = field._site_tree.query(x)
    return bool(d >= r * (1 - tol) - tol)


def _edge_label_changes(field, p, q, la, lb, tris, depth, min_len) -> int:
    if la == lb:
        return 0
    if depth <= 0 or np.hypot(q[0] - p[0], q[1] - p[1]) <= min_len:
        return 1
    mid = ((p[0] + q[0]) / 2, (p[1] + q[1]) / 2)
    _, lm = field.query(mid, tris)
    return _edge_label_changes(field, p, mid, la, lm, tris, depth - 1, min_len) + _edge_label_changes(
        field, mid, q, lm, lb, tris, depth - 1, min_len
    )


def edge_crossings(
    field: DistanceField, resolve_depth: int | None = None, min_len: float = 1e-7
) -> np.ndarray:
    """Label changes along every terrain edge, in ``terrain.edges`` order.

    Consecutive Steiner nodes with different labels are bisected up to
    ``resolve_depth`` times using point queries, so that several boundaries
    inside one lattice interval are told apart.  The default resolves only
    when distances are exact (planar terrains); graph point queries cannot
    reveal labels absent from nearby nodes.
    """
    graph = field.graph
    terrain = graph.terrain
    if resolve_depth is None:
        resolve_depth = 24 if graph.planar else 0
    lab = field.label
    xy = graph.nodes[:, :2]
    et = terrain.edge_triangles
    out = np.zeros(len(terrain.edges), dtype=np.int64)
    for e, (u, v) in enumerate(terrain.edges.tolist()):
        ids = graph.edge_nodes(u, v)
        seq = lab[ids]
        changes = np.flatnonzero(seq[1:] != seq[:-1])
        if resolve_depth == 0 or len(changes) == 0:
            out[e] = len(changes)
            continue
        tris = et[(u, v)]
        total = 0
        for c in changes.tolist():
            total += _edge_label_changes(
                field, xy[ids[c]], xy[ids[c + 1]], int(seq[c]), int(seq[c + 1]), tris, resolve_depth, min_len
            )
        out[e] = total
    return out


def interior_edge_mask(terrain: TriangulatedTerrain) -> np.ndarray:
    """True for edges shared by two triangles (not on the square's border)."""
    et = terrain.edge_triangles
    return np.array([len(et[(u, v)]) == 2 for u, v in terrain.edges.tolist()], dtype=bool)


def count_chord_edge_crossings(
    field: DistanceField,
    terrain: TriangulatedTerrain | None = None,
    resolve_depth: int | None = None,
    edge_mask=None,
) -> int:
    """Sum of label changes over interior terrain edges.

    Border edges are skipped by default: a bisector meeting the border ends
    there rather than crossing into a neighbouring triangle.  Pass
    ``edge_mask`` to choose the edges explicitly.
    """
    per_edge = edge_crossings(field, resolve_depth)
    if edge_mask is None:
        edge_mask = interior_edge_mask(field.graph.terrain)
    return int(per_edge[np.asarray(edge_mask, bool)].sum())


def euler_bound_holds(vertex_count: int, m: int) -> bool:
    return m < 3 or vertex_count <= 2 * m - 2


def cell_label_counts(field: DistanceField, g: int) -> dict[tuple[int, int], int]:
    """Distinct labels among lattice nodes in each cell of a ``g x g`` grid.

    Cells without a node are absent from the result.
    """
    xy = field.graph.nodes[:, :2]
    ci = np.clip((xy[:, 0] * g).astype(np.int64), 0, g - 1)
    cj = np.clip((xy[:, 1] * g).astype(np.int64), 0, g - 1)
    cell = ci * g + cj
    pairs = np.unique(np.column_stack([cell, field.label]), axis=0)
    cells, counts = np.unique(pairs[:, 0], return_counts=True)
    return {(int(c // g), int(c % g)): int(k) for c, k in zip(cells, counts)}


def euler_audit(field: DistanceField, grid: int | None = None) -> EulerAudit:
    v = count_voronoi_vertices(field)
    m = field.m
    g = grid if grid is not None else max(1, int(round(np.sqrt(m))))
    return EulerAudit(
        voronoi_vertex_count=v,
        m=m,
        bound=2 * m - 2 if m >= 3 else None,
        ok=euler_bound_holds(v, m),
        cell_label_counts=cell_label_counts(field, g),
    )


def disconnected_cells(field: DistanceField) -> list[int]:
    """Sites whose labelled lattice nodes split into several lattice-connected pieces."""
    rt = field.graph.refined_triangles
    e = np.concatenate([rt[:, [0, 1]], rt[:, [1, 2]], rt[:, [2, 0]]])
    lab = field.label
    keep = lab[e[:, 0]] == lab[e[:, 1]]
    e = e[keep]
    N = field.graph.n_nodes
    adj = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(N, N))
    _, comp = connected_components(adj, directed=False)
    pairs = np.unique(np.column_stack([lab, comp]), axis=0)
    sites, counts = np.unique(pairs[:, 0], return_counts=True)
    return [int(s) for s in sites[counts > 1]]


def label_boundary_segments(field: DistanceField) -> list[Segment2]:
    """Polyline pieces of the discrete cell boundaries, one per lattice triangle.

    Triangles with two labels contribute the segment joining the midpoints of
    their two bichromatic sides; trichromatic triangles contribute the three
    spokes from their centroid to the side midpoints.
    """
    rt = field.graph.refined_triangles
    lab = field.label[rt]
    xy = field.graph.nodes[:, :2]
    mixed = np.flatnonzero(~((lab[:, 0] == lab[:, 1]) & (lab[:, 1] == lab[:, 2])))
    segs = []
    for t in mixed.tolist():
        ids = rt[t]
        ls = lab[t]
        mids = []
        for a, b in ((0, 1), (1, 2), (2, 0)):
            if ls[a] != ls[b]:
                mids.append(Point2(*((xy[ids[a]] + xy[ids[b]]) / 2)))
        if len(mids) == 2:
            segs.append(Segment2(mids[0], mids[1]))
        else:
            c = Point2(*xy[ids].mean(axis=0))
            segs.extend(Segment2(c, mp) for mp in mids)
    return segs


def complexity_report(
    field: DistanceField, grid: int | None = None, resolve_depth: int | None = None
) -> VoronoiComplexityReport:
    """Vertices, breakpoint allowance and edge crossings of one labelled field.

    Vertices always use consolidated labels.  Crossings use them too unless
    distances are exact (planar terrains), where raw labels are correct and
    point queries resolve every crossing.
    """
    terrain = field.graph.terrain
    g = grid if grid is not None else max(1, int(round(np.sqrt(field.m))))
    clean = consolidate_labels(field)
    report = VoronoiComplexityReport(
        voronoi_vertex_count=count_voronoi_vertices(clean, consolidate=False),
        chord_edge_crossings=count_chord_edge_crossings(
            field if field.graph.planar else clean, resolve_depth=resolve_depth
        ),
        breakpoint_bound=terrain.n_vertices,
        m=field.m,
        n=terrain.n_vertices,
        per_cell_contributors=cell_label_counts(field, g),
        disconnected_cells=len(disconnected_cells(field)),
    )
    if not euler_bound_holds(report.voronoi_vertex_count, report.m):
        log.warning(
            "Euler bound violated: %d vertices for m=%d", report.voronoi_vertex_count, report.m
        )
    return report
