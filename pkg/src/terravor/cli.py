"""Command line entry point.

Exit status: 0 on success, 2 for invalid input or flags, 1 for anything
unexpected.  Every CSV or JSON output starts from a header comment (CSV) or
``argv``/``seed`` keys (JSON) so that results can be traced back to the
command that made them; nothing time- or host-dependent is written.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import constructions as con
from . import experiments as exp
from . import fatness as fat
from .geodesic import DEFAULT_REFINE, build_geodesic_graph
from .geom_core import TerrainError, format_terrain, read_terrain, write_terrain
from .input_models import (
    DEFAULT_EPS,
    DiskClipped,
    check_distance_sandwich,
    geodesic_disk_area,
    measure,
)
from .voronoi import complexity_report, voronoi_labeling

log = logging.getLogger("terravor")

STOCHASTIC = {"experiment", "check-model"}


class UsageError(ValueError):
    pass


def _int_list(text: str) -> list[int]:
    try:
        out = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not out or any(v <= 0 for v in out):
        raise argparse.ArgumentTypeError(f"sizes must be positive, got {text!r}")
    return out


def _positive(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="terravor", description="Geodesic Voronoi diagrams on terrains.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, stochastic=False):
        sp.add_argument("--seed", type=int, default=None, help="required" if stochastic else "optional")
        sp.add_argument("--out", default="-", help="output file ('-' for stdout)")

    g = sub.add_parser("generate", help="write a construction scene (JSON) or a random terrain")
    g.add_argument("--kind", required=True, choices=["farming", "industrial", "planar", "delaunay"])
    g.add_argument("--n", type=_positive, required=True)
    g.add_argument("--m", type=_positive, default=None)
    g.add_argument("--c", type=float, default=float(con.DEFAULT_C))
    g.add_argument("--w", type=float, default=float(con.DEFAULT_W))
    g.add_argument("--c0", type=float, default=None, help="enforce m <= c0*n (off by default)")
    g.add_argument("--xi", type=float, default=2.0, help="target slope for delaunay terrains")
    g.add_argument("--terrain-out", default=None, help="also write the planar-grid mesh here")
    common(g)

    c = sub.add_parser("check-model", help="measure slope, low density and distance distortion")
    c.add_argument("terrain")
    c.add_argument("--refine", type=int, default=DEFAULT_REFINE)
    c.add_argument("--pairs", type=_positive, default=100)
    c.add_argument("--eps", type=float, default=DEFAULT_EPS)
    common(c, stochastic=True)

    v = sub.add_parser("voronoi", help="complexity report for sites on a terrain")
    v.add_argument("terrain")
    v.add_argument("sites", help="CSV with x,y columns")
    v.add_argument("--refine", type=int, default=DEFAULT_REFINE)
    v.add_argument("--svg", default=None, help="render the diagram to this file")
    common(v)

    e = sub.add_parser("experiment", help="Monte Carlo experiments (CSV)")
    esub = e.add_subparsers(dest="experiment", required=True)

    s = esub.add_parser("scaling")
    s.add_argument("--kind", required=True, choices=list(exp.KINDS))
    s.add_argument("--n", type=_int_list, required=True)
    s.add_argument("--m", type=_int_list, required=True)
    s.add_argument("--trials", type=_positive, default=100)
    s.add_argument("--c", type=float, default=float(con.DEFAULT_C))
    s.add_argument("--w", type=float, default=float(con.DEFAULT_W))
    s.add_argument("--refine", type=int, default=3)
    s.add_argument("--xi", type=float, default=2.0)
    s.add_argument("--plot", default=None)

    gr = esub.add_parser("grid")
    gr.add_argument("--m", type=_positive, required=True)
    gr.add_argument("--trials", type=_positive, default=100)
    gr.add_argument("--plot", default=None)

    f = esub.add_parser("fatness")
    f.add_argument("--m", type=_positive, required=True)
    f.add_argument("--trials", type=_positive, default=2000)
    f.add_argument("--all-cells", action="store_true")
    f.add_argument("--plot", default=None)

    t = esub.add_parser("tails")
    t.add_argument("--m", type=_positive, required=True)
    t.add_argument("--trials", type=_positive, default=10000)
    t.add_argument("--plot", default=None)

    for sp in (s, gr, f, t):
        sp.add_argument("--jobs", type=_positive, default=None, help="worker processes (default: all cores)")
        common(sp, stochastic=True)
    return p


# ---------------------------------------------------------------- output


def _write_text(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)


# flags that only choose where output goes or how work is scheduled
_UNTRACKED = {"--out", "--plot", "--svg", "--terrain-out", "--jobs"}


def _tracked_argv(argv) -> list[str]:
    """``argv`` without output paths and ``--jobs``, which never change results."""
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        name = tok.split("=", 1)[0]
        if name in _UNTRACKED:
            skip = "=" not in tok
            continue
        out.append(tok)
    return out


def _provenance(argv, seed) -> str:
    return f"# terravor {' '.join(_tracked_argv(argv))} seed={seed}"


def write_csv(path: str, argv, seed, header, rows) -> None:
    buf = io.StringIO()
    buf.write(_provenance(argv, seed) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    _write_text(path, buf.getvalue())


def write_json(path: str, argv, seed, obj: dict) -> None:
    obj = {"argv": " ".join(_tracked_argv(argv)), "seed": seed, **obj}
    _write_text(path, json.dumps(obj, indent=1) + "\n")


def read_sites(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#")) if r]
    if rows and not _is_number(rows[0][0]):
        head = [h.strip().lower() for h in rows[0]]
        if head[:2] != ["x", "y"]:
            raise UsageError(f"sites CSV header must start with x,y, got {rows[0]}")
        rows = rows[1:]
    pts = np.array([[float(r[0]), float(r[1])] for r in rows], float)
    if len(pts) == 0:
        raise UsageError("sites CSV has no rows")
    return pts


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


# ---------------------------------------------------------------- commands


def cmd_generate(a, argv) -> None:
    if a.kind == "delaunay":
        if a.seed is None:
            raise UsageError("--seed is required for --kind delaunay")
        terrain = exp.random_delaunay_terrain(a.n, a.seed, a.xi)
        _write_text(a.out, format_terrain(terrain, comment=_provenance(argv, a.seed)[2:]))
        return
    if a.m is None:
        raise UsageError(f"--m is required for --kind {a.kind}")
    if a.kind == "planar":
        scene = con.gen_planar_grid(a.n, a.m)
        if a.terrain_out:
            write_terrain(con.planar_grid_mesh(scene), a.terrain_out, comment=_provenance(argv, a.seed)[2:])
    elif a.kind == "farming":
        scene = con.gen_farming(a.n, a.m, a.c, a.w, a.c0)
    else:
        scene = con.gen_industrial(a.n, a.m, a.w, a.c0)
    write_json(a.out, argv, a.seed, scene.as_dict())


def cmd_check_model(a, argv) -> None:
    terrain = read_terrain(a.terrain)
    params = measure(terrain)
    graph = build_geodesic_graph(terrain, a.refine)
    rng = np.random.default_rng(a.seed)
    ok = 0
    for _ in range(a.pairs):
        p, q = rng.random(2), rng.random(2)
        ok += check_distance_sandwich(graph, p, q, params.beta, a.eps).ok
    disk_ok = disk_n = 0
    for r in (0.05, 0.1, 0.15, 0.2, 0.25):
        try:
            d = geodesic_disk_area(graph, terrain, (0.5, 0.5), r)
        except DiskClipped:
            continue
        disk_n += 1
        disk_ok += d.lower_ok and d.upper_ok
    write_json(
        a.out,
        argv,
        a.seed,
        {
            "lambda_est": params.lambda_est,
            "xi": params.xi,
            "beta": params.beta,
            "sandwich_pass_rate": ok / a.pairs,
            "disk_area_checks": disk_ok / disk_n if disk_n else None,
            "disk_area_count": disk_n,
        },
    )


def cmd_voronoi(a, argv) -> None:
    terrain = read_terrain(a.terrain)
    sites = read_sites(a.sites)
    field = voronoi_labeling(terrain, sites, a.refine)
    report = complexity_report(field)
    write_json(a.out, argv, a.seed, report.as_dict())
    if a.svg:
        from .plotting import plot_voronoi

        plot_voronoi(field, a.svg)


def _ladder(ns, ms):
    if len(ns) == 1:
        return [(ns[0], m) for m in ms]
    if len(ms) == 1:
        return [(n, ms[0]) for n in ns]
    if len(ns) != len(ms):
        raise UsageError("--n and --m lists must have equal length (or one of them a single value)")
    return list(zip(ns, ms))


def cmd_experiment(a, argv) -> None:
    if a.seed is None:
        raise UsageError("--seed is required for experiments")
    kind = a.experiment
    if kind == "scaling":
        rows, fit = exp.scaling_experiment(
            a.kind, _ladder(a.n, a.m), a.trials, a.seed, c=a.c, w=a.w, refine=a.refine, xi_target=a.xi, jobs=a.jobs
        )
        write_csv(
            a.out,
            argv,
            a.seed,
            ["kind", "n", "m", "trials", "mean_complexity", "std_err", "seed"],
            [(r.kind, r.n, r.m, r.trials, r.mean_complexity, r.std_err, r.seed) for r in rows],
        )
        if fit is not None:
            print(f"slope={fit.slope:.4f} stderr={fit.stderr:.4f}", file=sys.stderr)
        if a.plot:
            from .plotting import plot_scaling

            plot_scaling(rows, fit, a.plot)
    elif kind == "grid":
        out, counts = [], []
        for t, stats, _ in exp.grid_experiment(a.m, a.trials, a.seed):
            out += [(t, s.cell_x, s.cell_y, s.contributor_count) for s in stats]
            counts += [s.contributor_count for s in stats]
        write_csv(a.out, argv, a.seed, ["trial", "cell_x", "cell_y", "contributors"], out)
        print(f"mean_contributors={np.mean(counts):.4f}", file=sys.stderr)
        if a.plot:
            from .plotting import plot_contributors

            plot_contributors(counts, a.plot)
    elif kind == "fatness":
        recs = fat.fatness_trials(a.m, a.trials, a.seed, a.all_cells, a.jobs)
        write_csv(
            a.out,
            argv,
            a.seed,
            ["trial", "m", "diameter", "R", "r", "fatness"],
            [(t, a.m, r.diameter, r.R, r.r, r.fatness) for t, r in recs],
        )
        print(f"mean_fatness={np.mean([r.fatness for _, r in recs]):.4f}", file=sys.stderr)
        if a.plot:
            from .plotting import plot_fatness

            plot_fatness([r for _, r in recs], a.plot)
    elif kind == "tails":
        rows = fat.diameter_tails(a.m, a.trials, a.seed, jobs=a.jobs)
        write_csv(a.out, argv, a.seed, ["j", "R_j", "bound", "empirical"], [tuple(r) for r in rows])
        if a.plot:
            from .plotting import plot_tails

            plot_tails(rows, a.plot)


COMMANDS = {
    "generate": cmd_generate,
    "check-model": cmd_check_model,
    "voronoi": cmd_voronoi,
    "experiment": cmd_experiment,
}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if a.command in STOCHASTIC and a.seed is None:
        flag = "--seed"
        print(f"terravor {a.command}: error: {flag} is required (stochastic subcommand)", file=sys.stderr)
        return 2
    try:
        COMMANDS[a.command](a, argv)
    except (UsageError, TerrainError, ValueError, OSError) as e:
        print(f"terravor {a.command}: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # pragma: no cover - reported, not swallowed silently
        log.exception("internal error")
        print(f"terravor {a.command}: internal error: {e}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())
