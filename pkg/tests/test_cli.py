import json
import subprocess
import sys

import pytest

from leftrs.cli import main


@pytest.fixture
def system_file(tmp_path):
    p = tmp_path / "s.json"
    assert main(["--seed", "3", "gen", "--M", "2", "--N", "2", "-o", str(p)]) == 0
    return p


def test_gen_stdout(capsys):
    assert main(["gen", "--M", "2", "--N", "1", "--seed", "1"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["num_cores"] == 2 and len(d["tasks"]) == 2


def test_gen_deterministic(capsys):
    main(["gen", "--seed", "8", "--M", "2", "--N", "2"])
    a = capsys.readouterr().out
    main(["gen", "--seed", "8", "--M", "2", "--N", "2"])
    assert a == capsys.readouterr().out


def test_analyze(system_file, capsys):
    for proto in ("leftrs", "msrpft", "msrpft-of", "checkpointing"):
        assert main(["analyze", str(system_file), "--protocol", proto, "--o-replica", "3"]) == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert out[-1].startswith(f"{proto}: ")
        d = json.loads("\n".join(out[:-1]))
        assert set(d["tasks"][0]) == {"id", "R_us", "E_us", "B_us", "F_us", "schedulable"}


def test_simulate(system_file, tmp_path, capsys):
    faults = tmp_path / "f.txt"
    tasks = json.loads(system_file.read_text())["tasks"]
    faulty = next(t["id"] for t in tasks if t["f_max"] > 0)
    faults.write_text(f"{faulty} 0 0 1\n")
    assert main(["simulate", str(system_file), "--faults", str(faults), "--horizon-us", "2000"]) == 0
    out = capsys.readouterr().out
    first = out.splitlines()[0].split()
    assert len(first) == 5 and first[1] == "release"
    summary = json.loads(out[out.index("{"):])
    assert summary["verdict"] in ("no-deadline-miss", "deadline-miss") and summary["jobs"]
    assert main(["simulate", str(system_file), "--pattern", "sporadic:2", "--faults", "7",
                 "--out-dir", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "trace.txt").exists() and (tmp_path / "o" / "summary.json").exists()


def test_sweep_and_plot(tmp_path, capsys):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({"param": "f", "values": [0, 3], "systems_per_point": 3,
                               "base": {"M": 2, "N": 2}}))
    out = tmp_path / "out"
    assert main(["sweep", str(cfg), "--out-dir", str(out), "--plot"]) == 0
    assert (out / "sweep_f.csv").exists() and (out / "sweep_f_exclusive.csv").exists()
    assert (out / "sweep_f.svg").exists()
    assert main(["plot", str(out / "sweep_f.csv"), "-o", str(tmp_path / "p.svg")]) == 0
    assert (tmp_path / "p.svg").exists()


def test_table(capsys):
    assert main(["table", "--param", "f", "--systems-per-point", "2", "--protocols", "leftrs,msrpft"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert "MSRP-FT only" in lines[0] and len(lines) == 9


def test_sound_ok(capsys):
    assert main(["sound", "--systems", "1", "--runs", "2", "--small"]) == 0
    assert "violations=0" in capsys.readouterr().out


def test_invalid_inputs(tmp_path, capsys):
    assert main(["analyze", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["analyze", str(bad)]) == 2
    bad.write_text(json.dumps({"num_cores": 1, "resources": [],
                               "tasks": [{"id": 0, "core": 0, "C_us": 1, "T_us": 10, "D_us": 11,
                                          "priority": 1, "f_max": 0, "accesses": {}}]}))
    assert main(["analyze", str(bad)]) == 2
    assert "D > T" in capsys.readouterr().err
    assert main(["sweep", "--param", "f", "--protocols", "nope"]) == 2
    assert main(["gen", "--rsf", "2"]) == 2
    assert main(["simulate", str(bad), "--faults", "zzz"]) == 2
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "leftrs", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "sweep" in r.stdout
