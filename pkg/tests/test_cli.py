import csv
import json
import xml.etree.ElementTree as ET

import pytest

from poa.cli import EXIT_IO, EXIT_NO_PATH, EXIT_OK, EXIT_USAGE, main
from poa.geometry import read_cloud, read_grid
from poa.scenario import builtin, load_spec


def test_generate_writes_world_and_refuses_overwrite(tmp_path, capsys):
    out = tmp_path / "w1"
    assert main(["generate", "setup1", "--out", str(out)]) == EXIT_OK
    assert "setup1" in capsys.readouterr().out
    assert read_grid(out / "passable.poagrid").occupied.sum() == 104
    assert read_grid(out / "unpassable.poagrid").width == 30
    assert len(read_cloud(out / "cloud.poacloud")) > 10000
    assert load_spec(out / "scenario.spec") == builtin("setup1")
    assert main(["generate", "setup1", "--out", str(out)]) == EXIT_USAGE
    assert "--force" in capsys.readouterr().err
    assert main(["generate", "setup1", "--out", str(out), "--force", "--seed", "3"]) == EXIT_OK
    assert load_spec(out / "scenario.spec").rng_seed == 3


def test_plan_from_world_dir_writes_csv_provenance_and_svg(tmp_path):
    world = tmp_path / "w"
    assert main(["generate", "setup2", "--out", str(world)]) == EXIT_OK
    out = tmp_path / "p"
    assert main(["plan", str(world), "astar", "--poa", "--out", str(out)]) == EXIT_OK
    rows = list(csv.reader((out / "path_start-A.csv").open()))
    assert rows[0][:2] == ["x", "y"] and len(rows) > 10
    prov = json.loads((out / "provenance.json").read_text())
    assert prov["planner"] == "astar+poa" and [l["status"] for l in prov["legs"]] == ["ok", "ok"]
    root = ET.parse(out / "plot.svg").getroot()
    assert root.tag.endswith("svg")
    text = (out / "plot.svg").read_text()
    assert "<script" not in text and "href" not in text


def test_plan_failure_exit_code(tmp_path):
    assert main(["plan", "setup2", "gvd", "--out", str(tmp_path / "g")]) == EXIT_NO_PATH
    prov = json.loads((tmp_path / "g" / "provenance.json").read_text())
    assert prov["legs"][0]["status"] == "FAILURE"


def test_plan_3d(tmp_path):
    out = tmp_path / "d"
    code = main(["plan", "setup3d", "--planner", "astar", "--poa", "--3d", "--out", str(out)])
    assert code in (EXIT_OK, EXIT_NO_PATH)
    prov = json.loads((out / "provenance.json").read_text())
    ok = [l for l in prov["legs"] if l["status"] == "ok"]
    assert ok
    for leg in ok:
        assert leg["max_abs_roll"] <= 0.175 and leg["max_abs_pitch"] <= 0.175
        header = (out / f"path_{leg['leg']}.csv").read_text().splitlines()[0]
        assert header.split(",") == ["x", "y", "z", "yaw", "roll", "pitch"]


def run(argv):
    """Exit code whether ``main`` returns it or argparse raises ``SystemExit``."""
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


@pytest.mark.parametrize("argv", [
    ["plan", "setup1", "astar", "--3d"],
    ["plan", "setup1"],
    ["plan", "setup1", "astar", "--planner", "gvd"],
    ["plan", "nowhere", "astar"],
    ["bench", "setup1", "--planner", "dijkstra"],
    ["bench", "setup1", "--repeats", "0"],
    ["frobnicate"],
])
def test_usage_errors_exit_64(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run(argv) == EXIT_USAGE


def test_bad_spec_file_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.spec"
    bad.write_text("n_passable = 3\nnope = 1\n")
    assert main(["generate", str(bad), "--out", str(tmp_path / "o")]) == EXIT_USAGE
    assert "line 2" in capsys.readouterr().err


def test_io_error_exit_74(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["generate", "setup1", "--out", str(blocker / "sub")]) == EXIT_IO


def test_bench_prints_table_and_writes_files(tmp_path, capsys):
    params = tmp_path / "p.txt"
    params.write_text("rrt.max_iterations = 300\nrrt_runs = 1\n")
    out = tmp_path / "b"
    assert main(["bench", "setup1", "--planners", "astar,astar+poa", "--params", str(params),
                 "--out", str(out)]) == EXIT_OK
    table = capsys.readouterr().out
    assert "astar+poa" in table and "setup1" in table
    assert (out / "results.csv").read_text().startswith("setup,planner,seed,leg")
    assert (out / "summary.txt").read_text() == table


def test_help_exits_zero():
    assert run(["--help"]) == EXIT_OK
