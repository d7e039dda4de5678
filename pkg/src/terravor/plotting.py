"""Figures for Voronoi diagrams and experiment summaries.

All figures go straight to files through the Agg backend.  SVG output is
byte-stable: the id salt is fixed and no creation date is written.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402

from .voronoi import label_boundary_segments  # noqa: E402

GOLDEN = (math.sqrt(5) - 1.0) / 2.0

plt.rcParams.update(
    {
        "svg.hashsalt": "terravor",
        "svg.fonttype": "none",
        "font.size": 9,
        "axes.spines.top": False,
        "axes.spines.right": False,
    }
)


def _save(fig, path) -> None:
    fmt = str(path).rsplit(".", 1)[-1].lower()
    meta = {"Date": None} if fmt in ("svg", "pdf") else {}
    if fmt == "png":
        meta = {"Software": None}
    fig.savefig(path, metadata=meta, bbox_inches="tight")
    plt.close(fig)


def plot_voronoi(field, path, show_mesh: bool = True, width: float = 5.0) -> None:
    """Discrete cell boundaries, terrain edges and sites over the unit square."""
    fig, ax = plt.subplots(figsize=(width, width))
    terrain = field.graph.terrain
    if show_mesh:
        xy = terrain.xy
        segs = xy[terrain.edges]
        ax.add_collection(LineCollection(segs, colors="0.8", linewidths=0.4))
    bnd = np.array([[s.a, s.b] for s in label_boundary_segments(field)], float).reshape(-1, 2, 2)
    ax.add_collection(LineCollection(bnd, colors="C0", linewidths=0.8))
    ax.plot(field.sites[:, 0], field.sites[:, 1], "k.", ms=3)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_aspect("equal")
    ax.set_title(f"m = {field.m}, n = {terrain.n_vertices}")
    _save(fig, path)


def plot_scaling(rows, fit, path, width: float = 4.5) -> None:
    """Mean complexity against ``m`` on log-log axes, with the fitted line."""
    fig, ax = plt.subplots(figsize=(width, width * GOLDEN))
    m = np.array([r.m for r in rows], float)
    y = np.array([r.mean_complexity for r in rows], float)
    se = np.array([r.std_err for r in rows], float)
    ax.errorbar(m, y, yerr=se, fmt="o", ms=4, capsize=2, label=rows[0].kind if rows else None)
    if fit is not None:
        xs = np.geomspace(m.min(), m.max(), 50)
        ax.plot(xs, np.exp(fit.intercept) * xs**fit.slope, "-", lw=1,
                label=f"slope {fit.slope:.3f} $\\pm$ {fit.stderr:.3f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("m")
    ax.set_ylabel("mean complexity")
    ax.legend(frameon=False)
    _save(fig, path)


def plot_fatness(records, path, width: float = 4.5) -> None:
    """Histogram of cell fatness values."""
    f = np.array([r.fatness for r in records], float)
    fig, ax = plt.subplots(figsize=(width, width * GOLDEN))
    ax.hist(f, bins=40, color="C0", alpha=0.8)
    ax.axvline(f.mean(), color="k", lw=1, ls="--", label=f"mean {f.mean():.3f}")
    ax.set_xlabel("fatness R/r")
    ax.set_ylabel("cells")
    ax.legend(frameon=False)
    _save(fig, path)


def plot_tails(rows, path, width: float = 4.5) -> None:
    """Empirical diameter tail against the exponential bound."""
    j = [r.j for r in rows]
    fig, ax = plt.subplots(figsize=(width, width * GOLDEN))
    ax.semilogy(j, [r.bound for r in rows], "k-", lw=1, label="bound")
    emp = np.array([r.empirical for r in rows], float)
    ax.semilogy(np.array(j)[emp > 0], emp[emp > 0], "o", ms=4, label="empirical")
    ax.set_xlabel("j")
    ax.set_ylabel("P[diameter > R_j]")
    ax.legend(frameon=False)
    _save(fig, path)


def plot_contributors(counts, path, width: float = 4.5) -> None:
    """Distribution of distinct labels per grid cell."""
    c = np.asarray(counts, int)
    fig, ax = plt.subplots(figsize=(width, width * GOLDEN))
    ax.bar(*np.unique(c, return_counts=True), color="C0")
    ax.set_xlabel("contributors per cell")
    ax.set_ylabel("cells")
    _save(fig, path)
