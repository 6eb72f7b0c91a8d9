import json

import pytest

from redsched.cli import main
from redsched.constraints import ConstraintSystem
from redsched.simulator import MachineTrace
from redsched.solver import Schedule

from conftest import fixture_path


def _schedule(tmp_path, name, *extra, out="out"):
    return main(["schedule", str(fixture_path(name)), "--out", str(tmp_path / out), *extra])


def _simulate(tmp_path, name, out="out", *extra):
    return main(["simulate", str(fixture_path(name)), "--out", str(tmp_path / out), *extra])


COUNTER = ("--params", "N=4", "--lambda-r", "(i,j->j)", "--lambda-mode", "joint")


def test_gupta_run_reports_violations(tmp_path):
    assert _schedule(tmp_path, "rows.sare", *COUNTER, "--regime", "gupta") == 0
    assert _simulate(tmp_path, "rows.sare") == 3
    report = json.loads((tmp_path / "out" / "violations.json").read_text())
    assert report["violations"] and report["oracle_agrees"] and not report["clean"]


def test_fixed_run_is_clean(tmp_path):
    assert _schedule(tmp_path, "rows.sare", *COUNTER, "--regime", "fixed") == 0
    assert _simulate(tmp_path, "rows.sare") == 0
    report = json.loads((tmp_path / "out" / "violations.json").read_text())
    assert report["violations"] == [] and report["work_efficient"]


def test_tiled_auto_report(tmp_path, capsys):
    code = _schedule(tmp_path, "square.sare", "--params", "N=9", "--regime", "tiled",
                     "--lambda-r", "(i,j->i)", "--tile-size", "auto", "--plot")
    assert code == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["tile_size"]["X"]["s"] == 3
    assert report["makespan"] == [15]
    assert (tmp_path / "out" / "R.svg").exists()
    assert "makespan: (15,)" in capsys.readouterr().out


def test_artifacts_round_trip(tmp_path):
    assert _schedule(tmp_path, "square.sare", "--params", "N=4", "--regime", "tiled",
                     "--lambda-r", "(i,j->i)", "--tile-size", "2") == 0
    assert _simulate(tmp_path, "square.sare") == 0
    out = tmp_path / "out"
    text = (out / "schedule.json").read_text()
    assert Schedule.loads(text).dumps() + "\n" == text
    cons = json.loads((out / "constraints.json").read_text())
    assert ConstraintSystem.from_json(cons).to_json() == cons
    trace = (out / "trace.jsonl").read_text()
    assert MachineTrace.from_jsonl(trace).to_jsonl() == trace


def test_outputs_are_byte_identical(tmp_path):
    args = ("--params", "N=5", "--regime", "fixed", "--lambda-r", "(i,j->i)", "--plot")
    for out in ("a", "b"):
        assert _schedule(tmp_path, "triangle.sare", *args, out=out) == 0
        _simulate(tmp_path, "triangle.sare", out)
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert {"schedule.json", "constraints.json", "report.json", "trace.jsonl", "violations.json", "R.svg"} <= set(names)
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_plot_command(tmp_path, capsys):
    assert _schedule(tmp_path, "triangle.sare", "--params", "N=9", "--lambda-r", "(i,j->i)", "--regime", "gupta") == 0
    assert main(["plot", str(fixture_path("triangle.sare")), "--out", str(tmp_path / "out")]) == 0
    svg = (tmp_path / "out" / "R.svg").read_text()
    assert svg.count('class="point"') == 55 and svg.count('class="slice"') == 10


def test_plot_skips_high_dimensions(tmp_path, capsys):
    src = tmp_path / "cube.sare"
    src.write_text(
        "param N;\ninput A {i,j,k | 0<=i and i<=N and 0<=j and j<=N and 0<=k and k<=N};\n"
        "var X {i | 0<=i and i<=N};\nX(i) = reduce(+, (i,j,k -> i), A(i,j,k));\n"
    )
    args = ["--params", "N=1", "--lambda-r", "(i,j,k->j)", "--regime", "fixed", "--out", str(tmp_path / "out")]
    assert main(["schedule", str(src), *args]) == 0
    assert main(["plot", str(src), "--out", str(tmp_path / "out")]) == 0
    assert "skipped A" in capsys.readouterr().err


def test_explain(tmp_path, capsys):
    code = main(["explain", str(fixture_path("triangle.sare")), "--params", "N=2", "--lambda-r", "(i,j->i)", "--regime", "gupta"])
    assert code == 0
    out = capsys.readouterr().out
    assert "3 slices" in out and "[10] 3" in out


@pytest.mark.parametrize(
    "argv",
    [
        ["--params", "N"],
        ["--params", "N=x"],
        ["--params", "N=1,N=2"],
        ["--params", "M=3"],
        ["--params", "N=3", "--regime", "tiled"],
        ["--params", "N=3", "--tile-size", "big", "--regime", "tiled"],
        ["--params", "N=3", "--lambda-r", "(i -> i)"],
    ],
)
def test_input_errors_exit_one(tmp_path, argv, capsys):
    assert _schedule(tmp_path, "triangle.sare", *argv) == 1
    assert "error:" in capsys.readouterr().err


def test_parse_error_exits_one(tmp_path, capsys):
    src = tmp_path / "bad.sare"
    src.write_text("param N;\ninput A {i | i <= N")
    assert main(["schedule", str(src), "--params", "N=1", "--out", str(tmp_path)]) == 1
    assert "error:" in capsys.readouterr().err


def test_bound_exhaustion_exits_two(tmp_path, capsys):
    code = _schedule(tmp_path, "triangle.sare", "--params", "N=3", "--lambda-r", "(i,j->i)", "--regime", "gupta",
                     "--coeff-bound", "1")
    assert code == 2
    assert "bound" in capsys.readouterr().err
    assert not (tmp_path / "out" / "schedule.json").exists()


def test_corrupted_schedule_exits_one(tmp_path, capsys):
    (tmp_path / "out").mkdir()
    (tmp_path / "out" / "schedule.json").write_text("{not json")
    assert _simulate(tmp_path, "triangle.sare") == 1
    assert "malformed schedule" in capsys.readouterr().err


def test_schedule_for_another_program_exits_one(tmp_path, capsys):
    assert _schedule(tmp_path, "triangle.sare", "--params", "N=3", "--lambda-r", "(i,j->i)", "--regime", "gupta") == 0
    assert _simulate(tmp_path, "backward.sare") == 1
    assert "error:" in capsys.readouterr().err


def test_simulate_rejects_other_parameters(tmp_path, capsys):
    assert _schedule(tmp_path, "triangle.sare", "--params", "N=3", "--lambda-r", "(i,j->i)", "--regime", "gupta") == 0
    assert _simulate(tmp_path, "triangle.sare", "out", "--params", "N=4") == 1
