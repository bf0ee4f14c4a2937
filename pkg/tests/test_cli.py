"""Command line interface, driven in process through ``main(argv)``."""

import json

import numpy as np
import pytest

import meshsmooth as ms
from meshsmooth import Element, Mesh
from meshsmooth.cli import main
from meshsmooth.quality import QualityFn, element_values

from conftest import insert_centroids

REPORT_KEYS = {"method", "measure", "average", "min", "max", "invalid_count",
               "iterations", "converged", "wall_ms"}


def read_report(path):
    with open(path) as fh:
        return json.load(fh)


@pytest.fixture
def bumpy_path(tmp_path):
    mesh = ms.perturbed(ms.square_tri(5), 0.3, seed=21)
    path = tmp_path / "bumpy.off"
    ms.save_mesh(mesh, path)
    return str(path)


@pytest.fixture
def ball_path(tmp_path):
    mesh = ms.perturbed(ms.ball_tet(3), 0.2, seed=22)
    path = tmp_path / "ball.node"
    ms.save_mesh(mesh, path)
    return str(path)


# -- generate ---------------------------------------------------------------

def test_generate_writes_mesh(tmp_path, capsys):
    out = tmp_path / "grid.off"
    code = main(["generate", "--kind", "square_tri", "--n", "3",
                 "--out", str(out)])
    assert code == 0
    assert "16 vertices" in capsys.readouterr().out
    mesh = ms.load_mesh(out)
    assert mesh.n_elements == 18


def test_generate_matches_library(tmp_path):
    out = tmp_path / "noisy.off"
    main(["generate", "--kind", "square_tri", "--n", "4",
          "--sigma", "0.2", "--seed", "7", "--out", str(out)])
    expect = ms.generate("square_tri", 4, sigma=0.2, seed=7)
    assert np.array_equal(ms.load_mesh(out).vertices, expect.vertices)


def test_generate_ball_writes_node_ele(tmp_path):
    out = tmp_path / "b.node"
    assert main(["generate", "--kind", "ball_tet", "--n", "3",
                 "--out", str(out)]) == 0
    assert out.exists() and (tmp_path / "b.ele").exists()
    assert ms.load_mesh(out).is_tet_mesh


def test_generate_bad_kind_is_usage_error(tmp_path, capsys):
    code = main(["generate", "--kind", "torus", "--n", "3",
                 "--out", str(tmp_path / "t.off")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


# -- smooth -----------------------------------------------------------------

def test_smooth_laplace_report(bumpy_path, tmp_path, capsys):
    out = tmp_path / "smoothed.off"
    rep = tmp_path / "report.json"
    code = main(["smooth", "--in", bumpy_path, "--method", "laplace",
                 "--out", str(out), "--report", str(rep)])
    assert code == 0
    row = read_report(rep)
    assert set(row) == REPORT_KEYS
    assert row["method"] == "laplace"
    assert row["measure"] == "mr"
    assert row["converged"] is True
    assert row["iterations"] > 0
    assert row["invalid_count"] == 0
    assert row["wall_ms"] > 0
    before = ms.load_mesh(bumpy_path)
    after = ms.load_mesh(out)
    assert not np.array_equal(after.vertices, before.vertices)
    base = read_quality(before)
    assert row["average"] > base
    assert "laplace" in capsys.readouterr().out


def read_quality(mesh):
    return float(np.mean(element_values(mesh, QualityFn("mr"))))


def test_smooth_q2_ascent(bumpy_path, tmp_path):
    rep = tmp_path / "r.json"
    code = main(["smooth", "--in", bumpy_path, "--method", "q2",
                 "--out", str(tmp_path / "o.off"), "--iters", "200",
                 "--report", str(rep)])
    assert code == 0
    row = read_report(rep)
    assert row["method"] == "q2"
    assert row["min"] > 0.0


def test_smooth_report_to_stdout(bumpy_path, tmp_path, capsys):
    main(["smooth", "--in", bumpy_path, "--method", "laplace",
          "--out", str(tmp_path / "o.off"), "--report", "-"])
    out = capsys.readouterr().out
    row = json.loads(out[out.index("{"):])
    assert set(row) == REPORT_KEYS


def test_smooth_svg_output(bumpy_path, tmp_path):
    svg = tmp_path / "pic.svg"
    main(["smooth", "--in", bumpy_path, "--method", "laplace",
          "--out", str(tmp_path / "o.off"), "--svg", str(svg)])
    text = svg.read_text()
    assert text.startswith("<svg")
    assert text.count("<polygon") == 50


def test_smooth_project_circle(tmp_path):
    mesh = ms.perturbed(ms.disk_tri(3), 0.25, seed=4)
    src = tmp_path / "disk.off"
    ms.save_mesh(mesh, src)
    out = tmp_path / "round.off"
    code = main(["smooth", "--in", str(src), "--method", "laplace",
                 "--project", "circle", "--out", str(out)])
    assert code == 0
    after = ms.load_mesh(out)
    rim = np.linalg.norm(after.vertices[after.fixed], axis=1)
    assert np.allclose(rim, 1.0, atol=1e-9)
    # the rim slid: vertices moved along the circle
    assert not np.array_equal(after.vertices[after.fixed],
                              mesh.vertices[mesh.fixed])


def test_smooth_project_polyline(bumpy_path, tmp_path):
    out = tmp_path / "slid.off"
    code = main(["smooth", "--in", bumpy_path, "--method", "laplace",
                 "--project", "polyline", "--out", str(out)])
    assert code == 0
    after = ms.load_mesh(out)
    rim = after.vertices[after.fixed]
    # every boundary vertex stays on the unit-square outline
    on_edge = (np.isclose(rim, 0.0, atol=1e-9) |
               np.isclose(rim, 1.0, atol=1e-9)).any(axis=1)
    assert on_edge.all()
    inside = (rim > -1e-9) & (rim < 1.0 + 1e-9)
    assert inside.all()


def test_smooth_project_sphere_on_planar_mesh(bumpy_path, tmp_path, capsys):
    code = main(["smooth", "--in", bumpy_path, "--method", "laplace",
                 "--project", "sphere", "--out", str(tmp_path / "o.off")])
    assert code == 2
    assert "meshsmooth: error:" in capsys.readouterr().err


# -- quality ----------------------------------------------------------------

def test_quality_report(bumpy_path, tmp_path, capsys):
    rep = tmp_path / "q.json"
    assert main(["quality", "--in", bumpy_path, "--report", str(rep)]) == 0
    row = read_report(rep)
    assert set(row) == REPORT_KEYS
    assert row["method"] == "none"
    assert row["iterations"] == 0
    assert row["converged"] is True
    assert row["measure"] == "mr"
    assert "avg" in capsys.readouterr().out


def test_quality_default_measure_mixed(tmp_path):
    mesh = ms.square_mixed(4)
    path = tmp_path / "mixed.off"
    ms.save_mesh(mesh, path)
    rep = tmp_path / "q.json"
    main(["quality", "--in", str(path), "--report", str(rep)])
    assert read_report(rep)["measure"] == "iq2"


def test_quality_tet_measure(ball_path, tmp_path):
    rep = tmp_path / "q.json"
    main(["quality", "--in", ball_path, "--report", str(rep)])
    row = read_report(rep)
    assert row["measure"] == "mr"
    assert 0.0 < row["min"] <= row["average"] <= row["max"] <= 1.0


def test_quality_explicit_measure(bumpy_path, tmp_path):
    rep = tmp_path / "q.json"
    main(["quality", "--in", bumpy_path, "--measure", "iq2",
          "--report", str(rep)])
    assert read_report(rep)["measure"] == "iq2"


def test_quality_svg_rejects_tets(ball_path, tmp_path, capsys):
    code = main(["quality", "--in", ball_path,
                 "--svg", str(tmp_path / "p.svg")])
    assert code == 2
    assert "planar" in capsys.readouterr().err


# -- modify -----------------------------------------------------------------

def test_modify_removes_slivers(tmp_path, capsys):
    mesh = ms.perturbed(ms.square_tri(6), 0.25, seed=7)
    interior = np.flatnonzero(~mesh.fixed)
    bad = [mesh.vertex_elements(int(v))[0] for v in interior[:4]]
    mesh = insert_centroids(mesh, sorted(set(bad)))
    src = tmp_path / "slivers.off"
    ms.save_mesh(mesh, src)
    out = tmp_path / "clean.off"
    rep = tmp_path / "m.json"
    code = main(["modify", "--in", str(src), "--remove-below", "0.6",
                 "--out", str(out), "--report", str(rep)])
    assert code == 0
    row = read_report(rep)
    assert set(row) == REPORT_KEYS | {"collapsed"}
    assert row["method"] == "remove-below-0.6"
    assert row["collapsed"] >= 1
    assert row["converged"] is True
    cleaned = ms.load_mesh(out)
    assert element_values(cleaned, QualityFn("iq2")).min() >= 0.6
    assert cleaned.n_elements < mesh.n_elements
    assert "remove-below" in capsys.readouterr().out


def test_modify_failure_exits_2(tmp_path):
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.01]])
    mesh = Mesh(verts, [Element.tri(0, 1, 2)],
                fixed=np.ones(3, dtype=bool))
    src = tmp_path / "stuck.off"
    ms.save_mesh(mesh, src)
    code = main(["modify", "--in", str(src), "--remove-below", "0.6",
                 "--out", str(tmp_path / "o.off")])
    assert code == 2


# -- compare ----------------------------------------------------------------

def test_compare_default_polygon_methods(bumpy_path, tmp_path):
    rep = tmp_path / "c.json"
    code = main(["compare", "--in", bumpy_path, "--iters", "60",
                 "--report", str(rep)])
    assert code == 0
    payload = read_report(rep)
    assert payload["measure"] == "mr"
    names = [r["method"] for r in payload["rows"]]
    assert names == ["initial", "laplace", "laplace-weighted", "q2",
                     "sqrt-mr", "mr"]
    initial = payload["rows"][0]
    assert initial["iterations"] == 0
    for row in payload["rows"][1:]:
        assert set(row) == REPORT_KEYS
        assert row["average"] > initial["average"]


def test_compare_default_tet_methods(ball_path, tmp_path):
    rep = tmp_path / "c.json"
    code = main(["compare", "--in", ball_path, "--iters", "3",
                 "--report", str(rep)])
    assert code == 0
    names = [r["method"] for r in read_report(rep)["rows"]]
    assert names == ["initial", "laplace", "lambda1", "lambda2", "lambda3",
                     "lambda4", "lambda5", "sqrt-mr"]


def test_compare_explicit_methods(bumpy_path, tmp_path):
    rep = tmp_path / "c.json"
    main(["compare", "--in", bumpy_path, "--iters", "40",
          "--methods", "laplace, q2", "--report", str(rep)])
    names = [r["method"] for r in read_report(rep)["rows"]]
    assert names == ["initial", "laplace", "q2"]


def test_compare_unknown_method(bumpy_path, tmp_path, capsys):
    code = main(["compare", "--in", bumpy_path, "--methods", "annealing"])
    assert code == 2
    assert "unknown method" in capsys.readouterr().err


def test_compare_leaves_input_untouched(bumpy_path, tmp_path):
    before = ms.load_mesh(bumpy_path).vertices
    main(["compare", "--in", bumpy_path, "--iters", "20",
          "--methods", "laplace"])
    assert np.array_equal(ms.load_mesh(bumpy_path).vertices, before)


# -- exit codes and dispatch ------------------------------------------------

def test_no_command_is_usage_error(capsys):
    assert main([]) == 1
    assert "error:" in capsys.readouterr().err


def test_missing_required_argument(capsys):
    assert main(["smooth", "--method", "laplace"]) == 1
    assert "error:" in capsys.readouterr().err


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "meshsmooth" in capsys.readouterr().out


def test_missing_input_file(tmp_path, capsys):
    code = main(["quality", "--in", str(tmp_path / "absent.off")])
    assert code == 2
    assert "meshsmooth: error:" in capsys.readouterr().err


def test_malformed_input_file(tmp_path, capsys):
    path = tmp_path / "junk.off"
    path.write_text("not a mesh at all\n")
    code = main(["quality", "--in", str(path)])
    assert code == 2
    err = capsys.readouterr().err
    assert "meshsmooth: error:" in err
    assert "junk.off" in err
