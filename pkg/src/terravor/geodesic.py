"""Approximate surface distances on a terrain via a Steiner-point graph.

Every triangle carries the barycentric lattice of resolution ``K = k + 1``:
its three vertices, ``k`` evenly spaced points on each edge and the
``k(k-1)/2`` interior lattice points.  Nodes that share a triangle are joined
by straight arcs weighted with their 3D length.  Query points are attached to
every lattice node of the triangle that contains them.

On a terrain whose vertices all lie on one plane the surface is a convex
planar region, so geodesics are straight segments; the graph then answers
with closed-form 3D distances unless ``exact_planar=False``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .geom_core import TriangulatedTerrain, lifted_segment_length

DEFAULT_REFINE = 4


class NoSites(ValueError):
    pass


def lattice_ij(K: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(K + 1) for j in range(K + 1 - i)]


def _pair_key(u: np.ndarray, v: np.ndarray, n: int) -> np.ndarray:
    return u.astype(np.int64) * n + v.astype(np.int64)


@dataclass(frozen=True, eq=False)
class GeodesicGraph:
    """Steiner subdivision graph of a terrain.

    ``nodes`` holds lifted positions: terrain vertices first, then ``k``
    points per terrain edge (ordered from the lower vertex index), then the
    interior lattice points triangle by triangle.  ``tri_nodes[t]`` lists the
    node ids of triangle ``t`` in :func:`lattice_ij` order.
    """

    terrain: TriangulatedTerrain
    refinement_k: int
    nodes: np.ndarray
    tri_nodes: np.ndarray
    exact_planar: bool = True

    @property
    def K(self) -> int:
        return self.refinement_k + 1

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def planar(self) -> bool:
        return self.exact_planar and self.terrain.plane is not None

    def edge_nodes(self, u: int, v: int) -> np.ndarray:
        """Node ids along terrain edge (u, v), from ``u`` to ``v``."""
        a, b = min(u, v), max(u, v)
        e = self._edge_index[(a, b)]
        k = self.refinement_k
        n = self.terrain.n_vertices
        inner = n + e * k + np.arange(k)
        ids = np.concatenate([[a], inner, [b]])
        return ids if u == a else ids[::-1]

    @cached_property
    def _edge_index(self) -> dict[tuple[int, int], int]:
        return {(int(a), int(b)): e for e, (a, b) in enumerate(self.terrain.edges)}

    @cached_property
    def arcs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Unique undirected arcs ``(u, v, weight)`` with ``u < v``."""
        L = self.tri_nodes.shape[1]
        p, q = np.triu_indices(L, k=1)
        u = self.tri_nodes[:, p].ravel()
        v = self.tri_nodes[:, q].ravel()
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        key = np.unique(_pair_key(lo, hi, self.n_nodes))
        lo, hi = key // self.n_nodes, key % self.n_nodes
        w = np.linalg.norm(self.nodes[lo] - self.nodes[hi], axis=1)
        return lo, hi, w

    @cached_property
    def adjacency(self) -> list[list[tuple[int, float]]]:
        lo, hi, w = self.arcs
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        ww = np.concatenate([w, w])
        order = np.lexsort((dst, src))
        src, dst, ww = src[order], dst[order], ww[order]
        bounds = np.searchsorted(src, np.arange(self.n_nodes + 1))
        dst_l = dst.tolist()
        w_l = ww.tolist()
        b = bounds.tolist()
        return [list(zip(dst_l[b[i] : b[i + 1]], w_l[b[i] : b[i + 1]])) for i in range(self.n_nodes)]

    @cached_property
    def refined_triangles(self) -> np.ndarray:
        """Lattice sub-triangles as node-id triples, ``K**2`` per terrain triangle."""
        K = self.K
        pos = {ij: s for s, ij in enumerate(lattice_ij(K))}
        local = []
        for i in range(K):
            for j in range(K - i):
                local.append((pos[(i, j)], pos[(i + 1, j)], pos[(i, j + 1)]))
                if i + j <= K - 2:
                    local.append((pos[(i + 1, j)], pos[(i + 1, j + 1)], pos[(i, j + 1)]))
        local = np.array(local)
        return self.tri_nodes[:, local].reshape(-1, 3)

    @cached_property
    def node_triangles(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for t, row in enumerate(self.tri_nodes.tolist()):
            for v in row:
                out[v].append(t)
        return out

    def lift_points(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """Locate and lift points; returns (triangle ids, xyz)."""
        pts = np.asarray(pts, float).reshape(-1, 2)
        tri = np.array([self.terrain.locate(p) for p in pts], dtype=np.int64)
        z = np.array([self.terrain.height_at(p, t) for p, t in zip(pts, tri)])
        return tri, np.column_stack([pts, z])


def build_geodesic_graph(
    terrain: TriangulatedTerrain, refinement_k: int = DEFAULT_REFINE, exact_planar: bool = True
) -> GeodesicGraph:
    if refinement_k < 0:
        raise ValueError("refinement_k must be >= 0")
    k = refinement_k
    K = k + 1
    n = terrain.n_vertices
    edges = terrain.edges
    E = len(edges)
    T = terrain.n_triangles
    n_int = k * (k - 1) // 2
    tris = terrain.tris

    edge_keys = _pair_key(edges[:, 0], edges[:, 1], n)

    def edge_id(a, b):
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        return np.searchsorted(edge_keys, _pair_key(lo, hi, n)), a < b

    def on_edge(a, b, step):
        # node id of the point `step`/K of the way from vertex a to vertex b
        e, fwd = edge_id(a, b)
        pos = np.where(fwd, step, K - step)
        return n + e * k + (pos - 1)

    ij = lattice_ij(K)
    interior = {}
    for i, j in ij:
        if i > 0 and j > 0 and i + j < K:
            interior[(i, j)] = len(interior)
    base_int = n + E * k
    tri_nodes = np.empty((T, len(ij)), dtype=np.int64)
    for s, (i, j) in enumerate(ij):
        if i == 0 and j == 0:
            col = tris[:, 0]
        elif i == K:
            col = tris[:, 1]
        elif j == K:
            col = tris[:, 2]
        elif j == 0:
            col = on_edge(tris[:, 0], tris[:, 1], i)
        elif i == 0:
            col = on_edge(tris[:, 0], tris[:, 2], j)
        elif i + j == K:
            col = on_edge(tris[:, 1], tris[:, 2], j)
        else:
            col = base_int + np.arange(T) * n_int + interior[(i, j)]
        tri_nodes[:, s] = col

    xyz = terrain.xyz
    nodes = np.empty((base_int + T * n_int, 3))
    nodes[:n] = xyz
    if k:
        t_par = (np.arange(1, K) / K)[None, :, None]
        a = xyz[edges[:, 0]][:, None, :]
        b = xyz[edges[:, 1]][:, None, :]
        nodes[n:base_int] = (a + t_par * (b - a)).reshape(-1, 3)
    if n_int:
        bary = np.array([[K - i - j, i, j] for (i, j) in interior]) / K
        corner = xyz[tris]  # (T, 3, 3)
        nodes[base_int:] = np.einsum("sc,tcd->tsd", bary, corner).reshape(-1, 3)
    nodes.setflags(write=False)
    tri_nodes.setflags(write=False)
    return GeodesicGraph(terrain, k, nodes, tri_nodes, exact_planar)


def _relax(adj, dist, label, done, heap, target_nodes=None):
    """Dijkstra main loop, ordered by (distance, node, site); ties go to lower site."""
    pop, push = heapq.heappop, heapq.heappush
    while heap:
        d, u, s = pop(heap)
        if done[u] or d > dist[u] or (d == dist[u] and s != label[u]):
            continue
        done[u] = 1
        if target_nodes is not None and target_nodes(u, d):
            return
        for v, w in adj[u]:
            if done[v]:
                continue
            nd = d + w
            dv = dist[v]
            if nd < dv or (nd == dv and s < label[v]):
                dist[v] = nd
                label[v] = s
                push(heap, (nd, v, s))


@dataclass(frozen=True, eq=False)
class DistanceField:
    """Nearest-site label and distance for every graph node."""

    graph: GeodesicGraph
    sites: np.ndarray
    site_xyz: np.ndarray
    site_tri: np.ndarray
    dist: np.ndarray
    label: np.ndarray

    @property
    def m(self) -> int:
        return len(self.sites)

    @cached_property
    def _site_tree(self):
        return cKDTree(self.site_xyz)

    @cached_property
    def _sites_by_tri(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for s, t in enumerate(self.site_tri.tolist()):
            out.setdefault(t, []).append(s)
        return out

    def query(self, p, tris=None) -> tuple[float, int]:
        """Distance and label at an arbitrary domain point.

        ``tris`` may list the triangles incident to ``p`` (e.g. both sides of
        an edge); otherwise the containing triangle is located.
        """
        terrain = self.graph.terrain
        if tris is None:
            tris = [terrain.locate(p)]
        z = terrain.height_at(p, tris[0])
        xyz = np.array([p[0], p[1], z])
        if self.graph.planar:
            return _planar_nearest(self._site_tree, self.site_xyz, xyz[None, :])
        best_d, best_s = math.inf, -1
        for t in tris:
            ids = self.graph.tri_nodes[t]
            cand = self.dist[ids] + np.linalg.norm(self.graph.nodes[ids] - xyz, axis=1)
            for d, s in zip(cand.tolist(), self.label[ids].tolist()):
                if d < best_d or (d == best_d and s < best_s):
                    best_d, best_s = d, s
            for s in self._sites_by_tri.get(t, ()):
                d = float(np.linalg.norm(self.site_xyz[s] - xyz))
                if d < best_d or (d == best_d and s < best_s):
                    best_d, best_s = d, s
        return best_d, best_s


def _planar_nearest(tree, site_xyz, pts):
    """Exact nearest site with lowest-index tie-breaking; scalar for one point."""
    kk = min(2, len(site_xyz))
    d, idx = tree.query(pts, k=kk)
    if kk == 1:
        d = d[:, None]
        idx = idx[:, None]
    lab = idx[:, 0].copy()
    if kk == 2:
        tie = d[:, 1] == d[:, 0]
        lab[tie] = np.minimum(idx[tie, 0], idx[tie, 1])
    if len(pts) == 1:
        return float(d[0, 0]), int(lab[0])
    return d[:, 0], lab


def multi_source_field(graph: GeodesicGraph, sites) -> DistanceField:
    """Simultaneous shortest-path relaxation from all (lifted) sites."""
    sites = np.asarray(sites, float).reshape(-1, 2)
    if len(sites) == 0:
        raise NoSites("at least one site is required")
    site_tri, site_xyz = graph.lift_points(sites)
    N = graph.n_nodes
    if graph.planar:
        tree = cKDTree(site_xyz)
        dist, label = _planar_nearest(tree, site_xyz, graph.nodes)
        if np.ndim(dist) == 0:
            dist, label = np.array([dist]), np.array([label])
        field = DistanceField(graph, sites, site_xyz, site_tri, np.asarray(dist), np.asarray(label))
        field.__dict__["_site_tree"] = tree
        return field

    dist = [math.inf] * N
    label = [-1] * N
    done = bytearray(N)
    heap = []
    for s in range(len(sites)):
        ids = graph.tri_nodes[site_tri[s]]
        ds = np.linalg.norm(graph.nodes[ids] - site_xyz[s], axis=1).tolist()
        for v, d in zip(ids.tolist(), ds):
            if d < dist[v] or (d == dist[v] and s < label[v]):
                dist[v] = d
                label[v] = s
                heap.append((d, v, s))
    heapq.heapify(heap)
    _relax(graph.adjacency, dist, label, done, heap)
    return DistanceField(
        graph, sites, site_xyz, site_tri, np.array(dist), np.array(label, dtype=np.int64)
    )


def geodesic_distance(graph: GeodesicGraph, p, q) -> float:
    """Approximate surface distance between two domain points.

    Never below the exact geodesic; on bounded-slope terrains the
    overestimate shrinks as the refinement grows.
    """
    (tp, tq), xyz = graph.lift_points([p, q])
    if graph.planar or tp == tq:
        return float(np.linalg.norm(xyz[0] - xyz[1]))
    # the draped straight segment is a surface path; it also bounds the search
    best = lifted_segment_length(graph.terrain, p, q)
    q_ids = graph.tri_nodes[tq]
    q_w = dict(zip(q_ids.tolist(), np.linalg.norm(graph.nodes[q_ids] - xyz[1], axis=1).tolist()))

    N = graph.n_nodes
    dist = [math.inf] * N
    label = [0] * N
    done = bytearray(N)
    heap = []
    ids = graph.tri_nodes[tp]
    for v, d in zip(ids.tolist(), np.linalg.norm(graph.nodes[ids] - xyz[0], axis=1).tolist()):
        if d < dist[v]:
            dist[v] = d
            heap.append((d, v, 0))
    heapq.heapify(heap)
    state = {"best": best}

    def reached(u, d):
        if d >= state["best"]:
            return True
        w = q_w.get(u)
        if w is not None and d + w < state["best"]:
            state["best"] = d + w
        return False

    _relax(graph.adjacency, dist, label, done, heap, reached)
    return state["best"]


def single_source_field(graph: GeodesicGraph, p) -> DistanceField:
    return multi_source_field(graph, [p])
