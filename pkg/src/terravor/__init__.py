"""Geodesic Voronoi diagrams on polyhedral terrains and their expected complexity."""

from .geom_core import (
    Point2,
    Point3,
    Segment2,
    TriangulatedTerrain,
    build_terrain,
    flat_square,
    grid_terrain,
    pyramid,
    read_terrain,
    write_terrain,
)
from .geodesic import build_geodesic_graph, geodesic_distance, multi_source_field
from .voronoi import VoronoiComplexityReport, complexity_report, voronoi_labeling

__version__ = "0.1.0"
