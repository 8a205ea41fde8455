import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from dp_audit.cli import COMMANDS, DEFAULT_SEED, build_parser, main, read_samples, resolve_seed, UsageError

GOLDEN = Path(__file__).parent / "golden"


def write_samples(path, values):
    path.write_text("\n".join(repr(float(v)) for v in values) + "\n")
    return str(path)


@pytest.fixture
def files(tmp_path):
    rng = np.random.default_rng(1)
    a = write_samples(tmp_path / "a.txt", rng.normal(size=200))
    b = write_samples(tmp_path / "b.txt", rng.normal(1, 1, size=200))
    return a, b


def test_audit_zero_claim_accepts(files):
    a, b = files
    assert main(["audit", "--f", "zero", "--samples-d", a, "--samples-dp", b, "--alpha", "0.05"]) == 0


def test_audit_separated_fixture(capsys, tmp_path):
    out = tmp_path / "v.json"
    code = main(["audit", "--f", "identity", "--alpha", "0.05", "--n", "1000",
                 "--mechanism", "synthetic-separated", "--out", str(out)])
    assert code == 2
    assert "k = 152" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    assert doc["is_point_dp"] is False and doc["witness"]["k"] == 152


def test_band_writes_json(tmp_path):
    out = tmp_path / "band.json"
    argv = ["band", "--mechanism", "gaussian:mu=1,sigma=1", "--n", "2000", "--alpha", "0.1",
            "--seed", "7", "--out", str(out)]
    assert main(argv) == 0
    doc = json.loads(out.read_text())
    assert set(doc) == {"n", "alpha", "epsilon", "upper_pts", "lower_pts", "monotonized"}
    assert len(doc["upper_pts"]) == 2002
    first = out.read_bytes()
    assert main(argv) == 0
    assert out.read_bytes() == first


def test_band_csv(tmp_path, files):
    a, b = files
    out = tmp_path / "band.csv"
    assert main(["band", "--samples-d", a, "--samples-dp", b, "--out", str(out), "--format", "csv",
                 "--grid-size", "21", "--monotonize"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "x,upper,lower" and len(lines) == 22


def test_bound(capsys):
    assert main(["bound", "--f", "identity", "--g", "zero", "--r", "0.5", "--n", "100"]) == 0
    assert "delta_r = 1" in capsys.readouterr().out
    assert main(["bound", "--f", "identity", "--g", "zero@r=0.5", "--r", "0.4", "--n", "100"]) == 1
    assert main(["bound", "--f", "identity", "--g", "zero", "--n", "100"]) == 1


def test_validate_type1(tmp_path):
    out = tmp_path / "r.json"
    argv = ["validate-type1", "--mechanism", "gaussian:mu=1,sigma=1", "--f", "gdp:mu=1",
            "--n", "200", "--trials", "100", "--seed", "3", "--out", str(out)]
    assert main(argv) == 0
    first = out.read_bytes()
    assert main(argv + ["--threads", "4"]) == 0
    assert out.read_bytes() == first
    assert json.loads(first)["mode"] == "TypeI"


def test_validate_type1_detects_false_claim():
    argv = ["validate-type1", "--mechanism", "gaussian:mu=3,sigma=1", "--f", "gdp:mu=1",
            "--n", "500", "--trials", "50"]
    assert main(argv) == 2


def test_validate_type2_and_csv(tmp_path):
    out = tmp_path / "r.csv"
    argv = ["validate-type2", "--mechanism", "gaussian:mu=2,sigma=1", "--f", "gdp:mu=1",
            "--g", "pwl:" + str(write_pwl(tmp_path)), "--r", "0.9", "--n", "200", "--trials", "30",
            "--out", str(out), "--format", "csv"]
    assert main(argv) == 0
    assert len(out.read_text().splitlines()) == 31


def write_pwl(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text("0,0.5\n0.5,0\n1,0\n")
    return path


def test_validate_coverage():
    assert main(["validate-coverage", "--mechanism", "gaussian:mu=1,sigma=1", "--n", "200",
                 "--trials", "50"]) == 0
    assert main(["validate-coverage", "--mechanism", "mixture:m=4", "--n", "20", "--trials", "5"]) == 1


def test_validate_width(tmp_path):
    out = tmp_path / "w.json"
    assert main(["validate-width", "--mechanism", "gaussian:mu=1,sigma=1", "--n", "100,1000",
                 "--trials", "15", "--out", str(out)]) == 0
    assert [r["n"] for r in json.loads(out.read_text())] == [100, 1000]
    assert main(["validate-width", "--mechanism", "gaussian:mu=1,sigma=1", "--n", "1000,100",
                 "--trials", "15"]) == 2


def test_demos():
    assert main(["demo-impossibility", "--trials", "300"]) == 0
    assert main(["demo-lowerband", "--trials", "300"]) == 0
    assert main(["demo-f0", "--trials", "40", "--n", "50"]) == 0
    assert main(["demo-f0", "--sigma", "0"]) == 1


def test_sample_file_errors(tmp_path, capsys):
    good = write_samples(tmp_path / "good.txt", [1, 2, 3])
    bad = tmp_path / "bad.txt"
    bad.write_text("# header\n1.0\n\n2.0\ninf\n")
    assert main(["audit", "--f", "zero", "--samples-d", good, "--samples-dp", str(bad)]) == 1
    assert "bad.txt:5" in capsys.readouterr().err
    bad.write_text("1.0\nabc\n3\n")
    with pytest.raises(UsageError, match=":2: not a number"):
        read_samples(bad)
    short = write_samples(tmp_path / "short.txt", [1, 2])
    assert main(["audit", "--f", "zero", "--samples-d", good, "--samples-dp", short]) == 1
    assert main(["audit", "--f", "zero", "--samples-d", good]) == 1
    assert main(["audit", "--f", "zero", "--samples-d", str(tmp_path / "nope"), "--samples-dp", good]) == 1


def test_sample_file_comments(tmp_path):
    path = tmp_path / "s.txt"
    path.write_text("# outputs\n1.5  # first\n\n  -2e-3\n")
    assert read_samples(path) == [1.5, -0.002]


def test_source_errors(files):
    a, b = files
    assert main(["audit", "--f", "zero"]) == 1
    assert main(["audit", "--f", "zero", "--mechanism", "gaussian:mu=0,sigma=1"]) == 1
    assert main(["audit", "--f", "zero", "--mechanism", "gaussian:mu=0,sigma=1", "--n", "5",
                 "--samples-d", a, "--samples-dp", b]) == 1
    assert main(["audit", "--f", "nonsense", "--samples-d", a, "--samples-dp", b]) == 1
    assert main(["audit", "--f", "zero", "--alpha", "2", "--samples-d", a, "--samples-dp", b]) == 1
    assert main([]) == 1


def test_seed_resolution(monkeypatch):
    monkeypatch.delenv("DP_AUDIT_SEED", raising=False)
    assert resolve_seed(None) == DEFAULT_SEED == 0xC0FFEE
    assert resolve_seed(5) == 5
    monkeypatch.setenv("DP_AUDIT_SEED", "0x10")
    assert resolve_seed(None) == 16
    monkeypatch.setenv("DP_AUDIT_SEED", "junk")
    with pytest.raises(UsageError):
        resolve_seed(None)


def test_env_seed_matches_flag(tmp_path, monkeypatch):
    base = ["band", "--mechanism", "laplace:mu=1,b=1", "--n", "50"]
    monkeypatch.setenv("DP_AUDIT_SEED", "99")
    assert main(base + ["--out", str(tmp_path / "env.json")]) == 0
    monkeypatch.delenv("DP_AUDIT_SEED")
    assert main(base + ["--seed", "99", "--out", str(tmp_path / "flag.json")]) == 0
    assert main(base + ["--out", str(tmp_path / "default.json")]) == 0
    assert (tmp_path / "env.json").read_bytes() == (tmp_path / "flag.json").read_bytes()
    assert (tmp_path / "env.json").read_bytes() != (tmp_path / "default.json").read_bytes()


def test_external_mechanism(tmp_path, capsys):
    script = tmp_path / "mech.py"
    script.write_text(
        "import sys, random\n"
        "for line in sys.stdin:\n"
        "    p = line.split()\n"
        "    if p[0] == 'QUIT':\n"
        "        break\n"
        "    r = random.Random(int(p[3]))\n"
        "    shift = 10.0 if p[1] == 'DPRIME' else 0.0\n"
        "    for _ in range(int(p[2])):\n"
        "        print(r.random() + shift)\n"
        "    print('OK', flush=True)\n"
    )
    argv = ["audit", "--f", "identity", "--n", "300", "--mechanism", f"cmd:{sys.executable} {script}"]
    assert main(argv) == 2
    assert "claim rejected" in capsys.readouterr().out
    assert main(["audit", "--f", "zero", "--n", "3", "--mechanism", "cmd:echo nonsense"]) == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dp_audit", "bound", "--f", "identity", "--g",
                           "zero@r=0.5", "--n", "10"], capture_output=True, text=True)
    assert proc.returncode == 0 and "delta_r" in proc.stdout


def help_text(command, monkeypatch, capsys):
    monkeypatch.setenv("COLUMNS", "80")
    argv = ["--help"] if command is None else [command, "--help"]
    assert main(argv) == 0
    return capsys.readouterr().out


@pytest.mark.parametrize("command", [None, *COMMANDS])
def test_help_golden(command, monkeypatch, capsys):
    text = help_text(command, monkeypatch, capsys)
    golden = GOLDEN / f"{command or 'main'}.txt"
    if os.environ.get("DP_AUDIT_UPDATE_GOLDEN"):
        golden.parent.mkdir(exist_ok=True)
        golden.write_text(text)
    assert text == golden.read_text()


@pytest.mark.parametrize("command", list(COMMANDS))
def test_help_lists_every_flag(command, monkeypatch, capsys):
    text = help_text(command, monkeypatch, capsys)
    sub = build_parser()._subparsers._group_actions[0].choices[command]
    for action in sub._actions:
        for flag in action.option_strings:
            assert flag in text
        if action.option_strings and action.dest != "help":
            assert action.help
