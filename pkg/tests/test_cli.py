import csv
import json

from svis.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main


def test_run_quick(tmp_path, capsys):
    code = main(["run", "--experiment", "2", "--mode", "self-contained", "--type", "T12", "--replications", "3",
                 "--seed", "4", "--parallelism", "1", "--out", str(tmp_path)])
    assert code == EXIT_OK
    assert "(xii)" in capsys.readouterr().out
    rows = list(csv.DictReader(open(tmp_path / "peaks.csv")))
    assert len(rows) == 18 and {r["type"] for r in rows} == {"T12"}


def test_experiment1_single_ventilation(tmp_path):
    code = main(["run", "--experiment", "1", "--ventilation", "1350", "--replications", "2", "--out", str(tmp_path),
                 "--parallelism", "1"])
    assert code == EXIT_OK
    summary = list(csv.DictReader(open(tmp_path / "summary.csv")))
    assert [(r["type"], r["ventilation"], r["n"]) for r in summary] == [("T1", "1350", "2")]


def test_config_file_and_flag_precedence(tmp_path):
    cfg = {
        "params": {"quanta_generation_rate": 0},
        "school": {"lesson_minutes": 40},
        "experiment": {"experiment": 2, "types": ["T1", "T5"], "replications": 4, "seed": 2, "parallelism": 1,
                       "out": str(tmp_path / "from-config")},
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", "--config", str(path), "--replications", "2"]) == EXIT_OK
    summary = list(csv.DictReader(open(tmp_path / "from-config" / "summary.csv")))
    assert [r["type"] for r in summary] == ["T1", "T5"]
    assert all(r["n"] == "2" and r["max"] == "1" for r in summary)  # q = 0: only the seed is ever infected
    manifest = json.loads((tmp_path / "from-config" / "manifest.json").read_text())
    assert manifest["params"]["quanta_generation_rate"] == 0
    assert manifest["schools"][0]["lesson_minutes"] == 40


def test_bad_config_value_names_field(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"school": {"classroom": {"volume": 0}}}))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "ClassroomSpec.volume" in capsys.readouterr().err


def test_unknown_config_key(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"params": {"quanta": 1}}))
    assert main(["run", "--config", str(path)]) == EXIT_CONFIG
    assert "params.quanta" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code = main(["run", "--type", "T12", "--replications", "1", "--parallelism", "1", "--out", str(blocker / "x")])
    assert code == EXIT_RUNTIME
    assert str(blocker) in capsys.readouterr().err


def test_bad_type(capsys):
    assert main(["run", "--type", "T99", "--replications", "1"]) == EXIT_CONFIG
    assert "T99" in capsys.readouterr().err


def test_schedules_table(capsys):
    assert main(["schedules", "--mode", "departmentalized"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "(x)" in out and "25.0" in out


def test_patterns_listing(capsys):
    assert main(["patterns", "--type", "T10"]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "type (x): 48 pattern(s)" and len(out) == 49


def test_timetable_export(tmp_path):
    path = tmp_path / "tt.csv"
    assert main(["timetable", "--type", "T9", "--weeks", "1", "--out", str(path)]) == EXIT_OK
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == 24 * 7 * 7
    assert main(["timetable", "--type", "T9", "--pattern", "3"]) == EXIT_CONFIG


def test_trace_export(tmp_path):
    path = tmp_path / "trace.csv"
    assert main(["trace", "--type", "T11", "--seed", "3", "--out", str(path)]) == EXIT_OK
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == 84 * 24
    assert rows[0]["phase"] == "infectious_exposed"
