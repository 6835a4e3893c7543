import json

from gridfreq.cli import main


def test_simulate_writes_outputs(tmp_path, capsys):
    rc = main(["simulate", "ercot40", "--out", str(tmp_path / "o")])
    assert rc == 0
    out = tmp_path / "o"
    for name in ("trace.csv", "events.csv", "metrics.csv"):
        assert (out / name).stat().st_size > 0
    assert "nadir" in capsys.readouterr().out


def test_simulate_byte_identical_reruns(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "ercot40", "--out", str(a)]) == 0
    assert main(["simulate", "ercot40", "--out", str(b)]) == 0
    for name in ("trace.csv", "events.csv", "metrics.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_simulate_overrides(tmp_path):
    out = tmp_path / "o"
    rc = main(["simulate", "ercot40", "--out", str(out),
               "--dt", "0.01", "--horizon", "55"])
    assert rc == 0
    lines = (out / "trace.csv").read_text().splitlines()
    assert lines[1].startswith("0,")
    assert lines[2].startswith("0.01,")
    assert len(lines) == 1 + 5501


def test_unknown_scenario_fails(tmp_path, capsys):
    rc = main(["simulate", "not_a_scenario", "--out", str(tmp_path)])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_invalid_config_file_fails(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("{not json", encoding="utf-8")
    rc = main(["simulate", str(bad), "--out", str(tmp_path / "o")])
    assert rc == 1
    assert "syntax error" in capsys.readouterr().err


def test_compare_outputs(tmp_path, capsys):
    out = tmp_path / "cmp"
    rc = main(["compare", "ercot80", "--tactics", "FRL,ES1:step",
               "--out", str(out)])
    assert rc == 0
    table = (out / "compare.csv").read_text().splitlines()
    assert table[0].startswith("tactic,")
    assert [ln.split(",")[0] for ln in table[1:]] == ["baseline", "FRL", "ES1:step"]
    for slug in ("baseline", "frl", "es1_step"):
        assert (out / f"trace_{slug}.csv").stat().st_size > 0
        assert (out / f"events_{slug}.csv").stat().st_size > 0


def test_compare_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["compare", "ercot40", "--tactics", "SG1",
                     "--out", str(d)]) == 0
    assert (a / "compare.csv").read_bytes() == (b / "compare.csv").read_bytes()
    assert (a / "trace_sg1.csv").read_bytes() == (b / "trace_sg1.csv").read_bytes()


def test_compare_rejects_bad_tactic(tmp_path, capsys):
    rc = main(["compare", "ercot40", "--tactics", "SG7", "--out", str(tmp_path)])
    assert rc == 1
    assert "unknown tactic" in capsys.readouterr().err


def test_sweep_runs_small_grid(tmp_path, capsys):
    spec = {
        "base": "ercot40",
        "axes": [{"path": "governor_ratio", "values": [0.6, 1.0]}],
        "metrics": ["nadir_hz", "settle_hz"],
    }
    sweepfile = tmp_path / "grid.sweep.json"
    sweepfile.write_text(json.dumps(spec), encoding="utf-8")
    out = tmp_path / "sw"
    rc = main(["sweep", str(sweepfile), "--out", str(out)])
    assert rc == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "governor_ratio,nadir_hz,settle_hz,error"
    assert len(lines) == 3


def test_sweep_reports_cell_failures(tmp_path):
    spec = {
        "base": "ercot40",
        "axes": [{"path": "governor_ratio", "values": [2.0]}],
    }
    sweepfile = tmp_path / "bad.sweep.json"
    sweepfile.write_text(json.dumps(spec), encoding="utf-8")
    rc = main(["sweep", str(sweepfile), "--out", str(tmp_path / "sw")])
    assert rc == 1
    text = (tmp_path / "sw" / "sweep.csv").read_text()
    assert "governor_ratio" in text.splitlines()[1]
