import json
from pathlib import Path

import numpy as np
import pytest

from conflictsets import Scene, conflict_set
from conflictsets.cli import EXIT_INVALID, EXIT_OK, EXIT_SOLVER, run
from conflictsets.errors import SceneError
from conflictsets.io import (
    export_csv,
    export_obj,
    export_svg,
    format_value,
    loads_scene,
    polylines_from_table,
    read_table,
    scene_from_dict,
    scene_to_dict,
)

from conftest import circle

SCENES = Path(__file__).resolve().parents[1] / "scenes"

BASE = {
    "ambient_dim": 2,
    "surfaces": [
        {"kind": "circle", "coefficients": [-2, 0, 1]},
        {"kind": "circle", "coefficients": [2, 0, 0.5], "orientation": -1,
         "metric": {"Q": [[2, 0.1], [0.1, 1]]}},
    ],
    "options": {"box": [-4, 4, -3, 3], "continuation": {"step_max": 0.05}},
}


def _with(path, value):
    d = json.loads(json.dumps(BASE))
    node = d
    for key in path[:-1]:
        node = node[key]
    node[path[-1]] = value
    return d


def test_scene_round_trip():
    sc = scene_from_dict(BASE)
    assert sc.surfaces[1].surface.orientation == -1
    assert np.allclose(sc.options.box[0], [-4, -3])
    assert sc.settings.step_max == 0.05
    again = scene_from_dict(scene_to_dict(sc))
    for a, b in zip(sc.surfaces, again.surfaces):
        assert a.surface.kind == b.surface.kind
        assert np.array_equal(a.surface.coefficients, b.surface.coefficients)
        assert a.surface.orientation == b.surface.orientation
        assert np.array_equal(a.metric.Q, b.metric.Q)
        assert a.label == b.label


@pytest.mark.parametrize("path,value", [
    (("extra",), 1),
    (("surfaces", 0, "colour"), "red"),
    (("surfaces", 0, "orientation"), 0),
    (("surfaces", 0, "orientation"), True),
    (("surfaces", 0, "coefficients"), [0, 0, "1"]),
    (("surfaces", 0, "kind"), "torus"),
    (("surfaces", 1, "metric"), {"Q": [[1, 0], [0, -1]]}),
    (("surfaces", 1, "metric"), {"Q": [[1, 0]]}),
    (("options", "box"), [-1, 1, 2, 1]),
    (("options", "continuation"), {"step": 0.1}),
    (("ambient_dim",), 4),
    (("surfaces",), []),
])
def test_scene_schema_is_strict(path, value):
    with pytest.raises(SceneError):
        scene_from_dict(_with(path, value))


@pytest.mark.parametrize("bad", ["NaN", "Infinity", "-Infinity"])
def test_non_finite_numbers_rejected(bad):
    text = json.dumps(BASE).replace("0.5]", f"{bad}]", 1)
    with pytest.raises(SceneError):
        loads_scene(text)


def test_invalid_json():
    with pytest.raises(SceneError):
        loads_scene("{")


def test_format_value_round_trips():
    for v in (0.1, 1 / 3, -2.5e-300, 1e20, np.pi):
        assert float(format_value(v)) == v
    assert format_value(3) == "3" and format_value(True) == "1"


def test_csv_round_trip(tmp_path):
    sc = Scene.build([circle(-2, 0, 1), circle(2, 0, 0.5)])
    traces = conflict_set(sc, box=([-4, -4], [4, 4]))
    path = export_csv(traces, tmp_path / "c.csv")
    raw = path.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    header, rows, comments = read_table(path)
    assert header == ["branch", "t", "x1", "x2", "s1_1", "s2_1", "margin", "germ"]
    assert not comments
    assert len(rows) == sum(len(tr) for tr in traces)
    polys = polylines_from_table(header, rows, ["x1", "x2"])
    for P, tr in zip(polys, traces):
        assert np.array_equal(P, tr.vertices[:, :2])
    assert {r[-1] for r in rows} == {"A1A1"}


def test_empty_csv_needs_header_info(tmp_path):
    with pytest.raises(ValueError):
        export_csv([], tmp_path / "e.csv")
    export_csv([], tmp_path / "e.csv", n=2, param_dims=[1, 1])
    assert read_table(tmp_path / "e.csv")[1] == []


def test_svg_structure(tmp_path):
    P = np.array([[0.0, 0.0], [1.0, 2.0], [2.0, 0.5]])
    text = export_svg([P, P[:0].reshape(0, 2)], tmp_path / "a.svg", ([0, 0], [2, 2]), points=[(1, 1)]).read_text()
    assert text.startswith("<?xml") and text.rstrip().endswith("</svg>")
    assert text.count("<path") == 1 and text.count("<circle") == 1
    # y is flipped
    assert 'd="M 0 -0 L 1 -2 L 2 -0.5"' in text
    with pytest.raises(ValueError):
        export_svg([np.zeros((2, 3))], tmp_path / "b.svg", ([0, 0], [1, 1]))


def test_obj_structure(tmp_path):
    A = np.arange(9.0).reshape(3, 3)
    B = np.ones((1, 3))
    lines = export_obj([A, B], tmp_path / "a.obj").read_text().splitlines()
    assert sum(l.startswith("v ") for l in lines) == 4
    assert "l 1 2 3" in lines and "p 4" in lines
    with pytest.raises(ValueError):
        export_obj([np.zeros((2, 2))], tmp_path / "b.obj")
    with pytest.raises(ValueError):
        export_obj([A], tmp_path / "c.obj", mode="faces")


# --- command line -------------------------------------------------------------

def test_partitions_command(capsys):
    assert run(["partitions", "--n", "3", "--l", "2", "--new-cases"]) == EXIT_OK
    assert capsys.readouterr().out == "(2,2)\n(3)\n"


@pytest.mark.parametrize("args,files", [
    (["conflict", "--scene", "two_lines.json"], ["conflict.csv", "conflict.svg"]),
    (["oriented-conflict", "--scene", "eta_family.json", "--density", "32"], ["oriented-conflict.csv"]),
    (["symmetry", "--scene", "ellipse.json"], ["symmetry.csv", "symmetry.svg"]),
    (["center", "--scene", "ellipse.json"], ["center.csv", "center.svg"]),
    (["chords", "--scene", "two_circles.json"], ["chords.csv"]),
    (["kite", "--scene", "two_circles.json"], ["kite.csv", "kite.svg"]),
    (["front", "--scene", "ellipse.json", "--time", "0.5", "--both", "--samples", "64"], ["front.csv", "front.svg"]),
    (["classify", "--scene", "circle_ellipse.json", "--density", "32"], ["classify.txt"]),
])
def test_subcommands_write_outputs(tmp_path, args, files, capsys):
    args = [a if not a.endswith(".json") else str(SCENES / a) for a in args]
    assert run(args + ["--out", str(tmp_path)]) == EXIT_OK
    for f in files:
        assert (tmp_path / f).stat().st_size > 0
    assert capsys.readouterr().out


def test_front_samples(tmp_path):
    assert run(["front", "--scene", str(SCENES / "ellipse.json"), "--time", "0.5", "--samples", "16",
                "--out", str(tmp_path)]) == EXIT_OK
    header, rows, _ = read_table(tmp_path / "front.csv")
    assert len(rows) == 16 and header[:2] == ["branch", "surface"]


def test_check_reads_back_a_trace(tmp_path, capsys):
    scene = str(SCENES / "two_lines.json")
    assert run(["conflict", "--scene", scene, "--out", str(tmp_path), "--no-svg"]) == EXIT_OK
    assert not (tmp_path / "conflict.svg").exists()
    assert run(["check", "--scene", scene, "--trace", str(tmp_path / "conflict.csv"), "--out", str(tmp_path)]) == EXIT_OK
    _, rows, _ = read_table(tmp_path / "check.csv")
    # both footpoint normals are vertical: the margin is 1/sqrt(2) everywhere
    assert all(abs(r[2] - 2 ** -0.5) < 1e-12 for r in rows)


def test_kite_3d_writes_obj(tmp_path):
    assert run(["kite", "--scene", str(SCENES / "three_spheres.json"), "--density", "16",
                "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "kite.obj").read_text().startswith("# conflictsets")


def test_exit_codes(tmp_path, capsys):
    # bad arguments and bad scene files are invalid input
    assert run(["conflict"]) == EXIT_INVALID
    assert run(["nope"]) == EXIT_INVALID
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(_with(("extra",), 1)))
    assert run(["conflict", "--scene", str(bad), "--out", str(tmp_path)]) == EXIT_INVALID
    assert run(["conflict", "--scene", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == EXIT_INVALID
    assert run(["conflict", "--scene", str(SCENES / "two_circles.json"), "--box", "1,0,0,1",
                "--out", str(tmp_path)]) == EXIT_INVALID
    assert run(["kite", "--scene", str(SCENES / "ellipse.json"), "--out", str(tmp_path)]) == EXIT_INVALID
    # a valid scene with nothing inside the box is a solver failure
    assert run(["conflict", "--scene", str(SCENES / "two_circles.json"), "--box", "10,11,10,11",
                "--out", str(tmp_path)]) == EXIT_SOLVER
    err = capsys.readouterr().err
    assert "error:" in err and "solver failure:" in err


def test_help_exits_cleanly(capsys):
    assert run(["--help"]) == EXIT_OK
    assert "conflict" in capsys.readouterr().out
