import json
import subprocess
import sys

import pytest

from terravor.cli import read_sites, run
from terravor.geom_core import read_terrain


def test_generate_industrial_json(tmp_path, capsys):
    out = tmp_path / "scene.json"
    assert run(["generate", "--kind", "industrial", "--n", "32", "--m", "256", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["kind"] == "industrial" and len(d["farms"]) == 16
    assert "out" not in d["argv"]


def test_generate_guard_is_opt_in(tmp_path):
    assert run(["generate", "--kind", "farming", "--n", "4", "--m", "64", "--c0", "4", "--out", str(tmp_path / "x")]) == 2
    assert run(["generate", "--kind", "farming", "--n", "4", "--m", "64", "--out", str(tmp_path / "x")]) == 0


def test_generate_planar_mesh_and_voronoi(tmp_path):
    mesh = tmp_path / "mesh.txt"
    scene = tmp_path / "scene.json"
    assert run(["generate", "--kind", "planar", "--n", "5", "--m", "4", "--terrain-out", str(mesh), "--out", str(scene)]) == 0
    d = json.loads(scene.read_text())
    assert d["overlay_count"] == 15
    sites = tmp_path / "sites.csv"
    sites.write_text("x,y\n" + "".join(f"{x},{y}\n" for x, y in d["sites"]))
    rep = tmp_path / "rep.json"
    svg = tmp_path / "v.svg"
    assert run(["voronoi", str(mesh), str(sites), "--refine", "3", "--svg", str(svg), "--out", str(rep)]) == 0
    r = json.loads(rep.read_text())
    assert r["chord_edge_crossings"] == 15 and r["voronoi_vertex_count"] == 0
    assert svg.stat().st_size > 0


def test_generate_delaunay_roundtrip(tmp_path):
    t = tmp_path / "t.txt"
    assert run(["generate", "--kind", "delaunay", "--n", "20", "--seed", "3", "--out", str(t)]) == 0
    assert read_terrain(t).n_vertices == 24
    assert run(["generate", "--kind", "delaunay", "--n", "20", "--out", str(t)]) == 2


def test_check_model(tmp_path):
    t = tmp_path / "t.txt"
    run(["generate", "--kind", "delaunay", "--n", "20", "--seed", "1", "--out", str(t)])
    out = tmp_path / "m.json"
    assert run(["check-model", str(t), "--pairs", "20", "--seed", "2", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["sandwich_pass_rate"] == 1.0 and d["xi"] == pytest.approx(2.0)
    assert d["beta"] == pytest.approx(5**0.5) and d["lambda_est"] >= 1
    assert d["disk_area_count"] == 5 and d["disk_area_checks"] == 1.0


def test_stochastic_commands_need_seed(tmp_path, capsys):
    assert run(["experiment", "fatness", "--m", "64", "--trials", "2"]) == 2
    assert "--seed" in capsys.readouterr().err
    t = tmp_path / "t.txt"
    run(["generate", "--kind", "delaunay", "--n", "5", "--seed", "1", "--out", str(t)])
    assert run(["check-model", str(t)]) == 2


def test_bad_inputs_exit_two(tmp_path):
    assert run(["voronoi", str(tmp_path / "missing.txt"), str(tmp_path / "s.csv")]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("not a terrain\n")
    s = tmp_path / "s.csv"
    s.write_text("0.5,0.5\n")
    assert run(["voronoi", str(bad), str(s)]) == 2
    assert run(["experiment", "scaling", "--kind", "planar", "--n", "1,2", "--m", "1,2,3", "--seed", "0"]) == 2
    assert run(["generate", "--kind", "nope", "--n", "3"]) == 2
    assert run(["experiment", "scaling", "--kind", "planar", "--n", "0", "--m", "4", "--seed", "0"]) == 2


def test_read_sites(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("# comment\nx,y\n0.1,0.2\n0.3,0.4\n")
    assert read_sites(p).tolist() == [[0.1, 0.2], [0.3, 0.4]]
    p.write_text("a,b\n0.1,0.2\n")
    with pytest.raises(ValueError):
        read_sites(p)


@pytest.mark.parametrize(
    "args",
    [
        ["scaling", "--kind", "farming", "--n", "32", "--m", "256,1024", "--trials", "5"],
        ["grid", "--m", "64", "--trials", "2"],
        ["fatness", "--m", "64", "--trials", "5"],
        ["tails", "--m", "64", "--trials", "50"],
    ],
)
def test_experiment_csv_is_deterministic(tmp_path, args):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    plot = tmp_path / "p.png"
    assert run(["experiment", *args, "--seed", "9", "--jobs", "1", "--plot", str(plot), "--out", str(a)]) == 0
    assert run(["experiment", *args, "--seed", "9", "--jobs", "2", "--out", str(b)]) == 0
    text = a.read_text()
    assert text.startswith("# terravor experiment") and "seed=9" in text.splitlines()[0]
    assert a.read_bytes() == b.read_bytes()
    assert plot.stat().st_size > 0


def test_scaling_csv_header(tmp_path):
    a = tmp_path / "a.csv"
    run(["experiment", "scaling", "--kind", "planar", "--n", "3", "--m", "4,8", "--trials", "1", "--seed", "0", "--out", str(a)])
    lines = a.read_text().splitlines()
    assert lines[1] == "kind,n,m,trials,mean_complexity,std_err,seed"
    assert lines[2].split(",")[:5] == ["planar", "3", "4", "1", "9.0"]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "terravor", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "experiment" in r.stdout
