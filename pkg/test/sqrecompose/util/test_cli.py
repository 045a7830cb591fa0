"""
(test) sqrecompose.util.cli:

Runs the sqrecompose commands end to end on a tiny synthetic bundle.
"""

import csv
import json

import numpy as np
import pytest

from sqrecompose.assets.bundle import MANIFEST, read_mask
from sqrecompose.assets.composition_io import load_composition, save_composition
from sqrecompose.model.superquadric import Composition
from sqrecompose.util.cli import EXIT_INVALID, utility_entry
from sqrecompose.util.commands import GROUND_TRUTH

TINY_FIT = ["--k", "1", "--steps", "3", "--rays", "200", "--grid", "8", "--samples", "16", "--image-size", "16"]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Directory holding an empty settings file and a generated four-view bundle"""
    root = tmp_path_factory.mktemp("cli")
    (root / "settings.ini").write_text("")
    code = utility_entry(
        ["gen", str(root / "bundle"), "--views", "4", "--count", "1", "--seed", "3", "--image-size", "16",
         "--settings", str(root / "settings.ini")]
    )
    assert code == 0
    return root


def run(workspace, *args):
    return utility_entry([*args, "--settings", str(workspace / "settings.ini")])


def test_help_exits_cleanly(capsys):
    with pytest.raises(SystemExit) as excinfo:
        utility_entry(["--help"])
    assert excinfo.value.code == 0
    assert "fit" in capsys.readouterr().out


@pytest.mark.parametrize(
    "args",
    [
        [],
        ["fit", "bundle"],
        ["fit", "bundle", "--out", "run", "--bogus"],
        ["sweep", "bundle", "--param", "k", "--values", "1", "2", "--k", "2", "--out", "sweep.csv"],
        ["sweep", "bundle", "--param", "views", "--values", "0", "--out", "sweep.csv"],
        ["fit", "bundle", "--out", "run", "--views", "0"],
    ],
)
def test_invalid_arguments(args):
    with pytest.raises(SystemExit) as excinfo:
        utility_entry(args)
    assert excinfo.value.code == EXIT_INVALID


def test_generated_bundle(workspace):
    bundle = workspace / "bundle"
    assert (bundle / MANIFEST).exists()
    assert len(json.loads((bundle / MANIFEST).read_text())["views"]) == 4
    assert read_mask(bundle / "v000.png").shape == (16, 16)
    assert len(load_composition(bundle / GROUND_TRUTH)) == 1


def test_fit_then_eval(workspace, capsys):
    out = workspace / "run"
    assert run(workspace, "fit", str(workspace / "bundle"), "--out", str(out), "--dump-grids", *TINY_FIT) == 0
    composition = load_composition(out / "composition.json")
    assert len(composition) == 1
    assert len(load_composition(out / "snapshots" / "iter_1.json")) == 1
    trace = [json.loads(line) for line in (out / "trace.jsonl").read_text().splitlines()]
    assert [record["step"] for record in trace] == [0, 1, 2]
    assert trace[0]["gamma"] == 20.0
    assert trace[-1]["gamma"] == pytest.approx(150.0)
    assert json.loads((out / "config.json").read_text())["max_superquadrics"] == 1
    assert (out / "grids" / "iter_1.raw").stat().st_size == 8**3 * 4
    capsys.readouterr()

    report = workspace / "report.json"
    code = run(
        workspace, "eval", str(out / "composition.json"), str(workspace / "bundle" / GROUND_TRUTH),
        "--report", str(report), "--resolution", "16", "--points", "200",
    )
    assert code == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed == json.loads(report.read_text())
    assert 0.0 <= printed["iou"] <= 1.0
    assert printed["chamfer_l1"] > 0.0
    assert printed["per_primitive_count"] == {"fitted": 1, "reference": 1}


def test_render_ground_truth(workspace):
    out = workspace / "renders"
    code = run(
        workspace, "render", str(workspace / "bundle" / GROUND_TRUTH), str(workspace / "bundle"), "--out", str(out),
        "--mesh", "--mesh-density", "8", "--samples", "64", "--image-size", "16",
    )
    assert code == 0
    renders = sorted(out.glob("render_*.png"))
    assert [path.name for path in renders] == [f"render_{index:03d}.png" for index in range(4)]
    assert any(read_mask(path).any() for path in renders)
    assert (out / "composition.obj").read_text().count("g superquadric_") == 1


def test_render_empty_composition(workspace, capsys):
    empty = save_composition(Composition(), workspace / "empty.json")
    out = workspace / "empty-renders"
    assert run(workspace, "render", str(empty), str(workspace / "bundle"), "--out", str(out), "--mesh",
               "--image-size", "16") == 0
    assert "no mesh written" in capsys.readouterr().out
    assert not (out / "composition.obj").exists()
    for index in range(4):
        assert not np.any(read_mask(out / f"render_{index:03d}.png"))


def test_sweep_over_background_weight(workspace):
    out = workspace / "sweep.csv"
    code = run(
        workspace, "sweep", str(workspace / "bundle"), "--param", "lambda", "--values", "0.3", "0.6",
        "--out", str(out), "--resolution", "16", "--points", "100", *TINY_FIT,
    )
    assert code == 0
    with open(out, newline="") as csv_file:
        rows = list(csv.reader(csv_file))
    assert len(rows) == 3
    assert rows[0] == ["value", "iou", "chamfer", "wall_time"]
    assert [float(row[0]) for row in rows[1:]] == [0.3, 0.6]
    assert all(row[1] != "" for row in rows[1:])


def test_missing_bundle_names_the_manifest(workspace, capsys):
    code = run(workspace, "fit", str(workspace / "nowhere"), "--out", str(workspace / "lost"), *TINY_FIT)
    assert code == EXIT_INVALID
    assert str(workspace / "nowhere" / MANIFEST) in capsys.readouterr().err


def test_bad_settings_file(tmp_path, capsys):
    settings = tmp_path / "settings.ini"
    settings.write_text("[fit]\nlam = lots\n")
    code = utility_entry(["gen", str(tmp_path / "bundle"), "--views", "1", "--settings", str(settings)])
    assert code == EXIT_INVALID
    assert "lam" in capsys.readouterr().err
    assert not (tmp_path / "bundle").exists()


def test_fixed_density_slope(workspace):
    out = workspace / "fixed"
    fit = [str(workspace / "bundle"), "--out", str(out), "--gamma", "30", "--no-anneal", *TINY_FIT]
    assert run(workspace, "fit", *fit) == 0
    trace = [json.loads(line) for line in (out / "trace.jsonl").read_text().splitlines()]
    assert {record["gamma"] for record in trace} == {30.0}
    assert json.loads((out / "config.json").read_text())["gamma_anneal"] is False
