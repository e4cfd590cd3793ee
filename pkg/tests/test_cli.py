import json

import numpy as np
import pytest

from phaseclusters.cli import canonical_json, config_digest, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_enumerate(capsys, tmp_path):
    code, out, _ = run(capsys, "enumerate", "6", "--out", str(tmp_path))
    assert code == 0
    assert len(out.strip().splitlines()) == 12
    rows = (tmp_path / "isotropy.csv").read_text().splitlines()
    assert rows[0] == "sizes,fix_dim,num_conjugates,orbit_size" and len(rows) == 12
    code, out, _ = run(capsys, "enumerate", "2")
    assert [line.split()[0] for line in out.splitlines()[1:]] == ["2", "1"]
    code, out, _ = run(capsys, "enumerate", "7", "--out", str(tmp_path), "--format", "json")
    data = json.loads((tmp_path / "isotropy.json").read_text())
    assert {"sizes": "3 2 2", "fix_dim": 3, "num_conjugates": 105, "orbit_size": 210} in data


def test_enumerate_range(capsys):
    code, _, err = run(capsys, "enumerate", "13")
    assert code == 2 and "N must lie" in err


def test_solve_case0(capsys, tmp_path):
    code, out, _ = run(capsys, "solve", "--preset", "case0", "--guess", "0,1.5,3.1", "--out", str(tmp_path))
    assert code == 0
    state = json.loads((tmp_path / "state.json").read_text())
    np.testing.assert_allclose(state["phases"], [0, np.pi / 2, np.pi], atol=1e-9)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert set(manifest) >= {"command", "config_digest", "seed", "tool_version", "wall_time"}
    assert manifest["command"] == "solve"


def test_stability_case1(capsys, tmp_path):
    code, out, _ = run(capsys, "stability", "--preset", "case1", "--out", str(tmp_path))
    assert code == 0
    assert "TwoStable" in out
    assert "-0.423186" in out  # six significant digits
    rep = json.loads((tmp_path / "stability.json").read_text())["report"]
    assert rep["classification"] == "TwoStable"
    assert [t["multiplicity"] for t in rep["transverse"]] == [1, 1, 1]


def test_config_round_trip(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(capsys, "stability", "--preset", "case2", "--out", str(a))[0] == 0
    emitted = json.loads((a / "config.json").read_text())
    assert run(capsys, "stability", "--config", str(a / "config.json"), "--out", str(b))[0] == 0
    da = json.loads((a / "manifest.json").read_text())["config_digest"]
    db = json.loads((b / "manifest.json").read_text())["config_digest"]
    assert da == db == config_digest(emitted)
    assert canonical_json(json.loads((b / "config.json").read_text())) == canonical_json(emitted)


def test_design_steps(capsys, tmp_path):
    code, out, _ = run(capsys, "design", "--preset", "case1", "--r-min", "-5", "--r-max", "1.5",
                       "--steps", "66", "--jobs", "2", "--out", str(tmp_path))
    assert code == 0
    assert "0 -> 1 -> 2 -> 3" in out
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("r,lambda_1") and len(lines) == 67
    counts = [int(line.split(",")[4]) for line in lines[1:]]
    assert counts == sorted(counts)
    serial = tmp_path / "serial"
    run(capsys, "design", "--preset", "case1", "--r-min", "-5", "--r-max", "1.5",
        "--steps", "66", "--jobs", "1", "--out", str(serial))
    assert (serial / "sweep.csv").read_text() == (tmp_path / "sweep.csv").read_text()


def test_design_usage(capsys, tmp_path):
    assert run(capsys, "design", "--preset", "case1", "--out", str(tmp_path))[0] == 2
    assert run(capsys, "design", "--preset", "case1", "--r-min", "1", "--r-max", "0", "--out", str(tmp_path))[0] == 2


def test_simulate_outputs(capsys, tmp_path):
    cfg = tmp_path / "sim.json"
    cfg.write_text(json.dumps({"preset": "case1", "N": 6, "t_end": 50.0, "noise_amplitude": 1e-12}))
    code, out, _ = run(capsys, "simulate", "--config", str(cfg), "--seed", "5", "--out", str(tmp_path / "o"))
    assert code == 0
    o = tmp_path / "o"
    traj = (o / "trajectory.csv").read_text().splitlines()
    assert traj[0] == "t," + ",".join(f"theta_{i}" for i in range(1, 7))
    assert len(traj) == 502
    obs = (o / "observables.csv").read_text().splitlines()
    assert obs[0].startswith("t,Y_1") and len(obs) == 502
    assert "events" in json.loads((o / "itinerary.json").read_text())
    manifest = json.loads((o / "manifest.json").read_text())
    assert manifest["seed"] == 5 and manifest["dt"] == 0.001


def test_simulate_reproducible(capsys, tmp_path):
    for d in ("a", "b"):
        run(capsys, "simulate", "--preset", "case2", "--t-end", "5", "--seed", "9", "--out", str(tmp_path / d))
    assert (tmp_path / "a" / "trajectory.csv").read_text() == (tmp_path / "b" / "trajectory.csv").read_text()


def test_out_env(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("PHASECLUSTERS_OUT", str(tmp_path / "env"))
    assert run(capsys, "solve", "--preset", "case1")[0] == 0
    assert (tmp_path / "env" / "state.json").exists()


def test_portrait(capsys, tmp_path):
    code, out, _ = run(capsys, "portrait", "--preset", "case1", "--resolution", "64", "--out", str(tmp_path))
    assert code == 0
    assert len((tmp_path / "portrait.csv").read_text().splitlines()) == 4097
    fps = json.loads((tmp_path / "fixed_points.json").read_text())
    assert sum(fp["kind"] == "Sink" for fp in fps) >= 6


def test_parse_error_position(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"preset": "case1",\n  "t_end": }')
    code, _, err = run(capsys, "simulate", "--config", str(bad), "--out", str(tmp_path))
    assert code == 2
    assert "line 2, column 12" in err


def test_usage_errors(capsys, tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["solve", "--guess", "a,b"])
    assert info.value.code == 2
    assert run(capsys, "solve", "--out", str(tmp_path))[0] == 2
    assert run(capsys, "solve", "--config", str(tmp_path / "missing.json"))[0] == 2
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"coupling": {"c": [0, 1], "s": [1]}}))
    assert run(capsys, "solve", "--config", str(cfg), "--out", str(tmp_path))[0] == 2


def test_numerical_failure(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"coupling": {"c": [0, 0], "s": [1]}, "sizes": [1, 1], "guess": [0, 1.5707963267948966]}))
    code, _, err = run(capsys, "solve", "--config", str(cfg), "--out", str(tmp_path))
    assert code == 3 and "numerical failure" in err
