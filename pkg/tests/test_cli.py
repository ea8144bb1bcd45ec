import json
import subprocess
import sys

import numpy as np
import pytest

from sbmlab.cli import main


@pytest.fixture
def sample(tmp_path):
    edges, labels = tmp_path / "g.txt", tmp_path / "x.txt"
    rc = main(["generate", "--ssbm", "2,8,1", "--n", "1500", "--seed", "4",
               "--out", str(edges), "--labels-out", str(labels)])
    assert rc == 0
    return edges, labels


def test_generate_is_seeded(tmp_path, capsys):
    main(["--seed", "9", "generate", "--ssbm", "2,5,1", "--n", "200"])
    first = capsys.readouterr().out
    main(["generate", "--ssbm", "2,5,1", "--n", "200", "--seed", "9"])
    assert capsys.readouterr().out == first
    assert all(len(line.split()) == 2 for line in first.splitlines())


@pytest.mark.parametrize("method", ["abp", "nb-power", "nb-eig", "adj", "lap"])
def test_detect_output_format(sample, capsys, method):
    edges, labels = sample
    assert main(["detect", "--edges", str(edges), "--method", method, "--truth", str(labels)]) == 0
    lines = capsys.readouterr().out.splitlines()
    body, footer = lines[:-1], lines[-1]
    assert [int(l.split()[0]) for l in body] == list(range(1500))
    assert {l.split()[1] for l in body} <= {"1", "2"}
    assert footer.startswith(f"# method={method} n=1500") and "agreement=" in footer


def test_detect_abp_options(sample, capsys):
    edges, labels = sample
    argv = ["detect", "--edges", str(edges), "--method", "abp", "--r", "3", "--m", "25",
            "--bias", "matrix", "--truth", str(labels)]
    assert main(argv) == 0
    footer = capsys.readouterr().out.splitlines()[-1]
    assert float(footer.split("agreement=")[1].split()[0]) > 0.8


def test_detect_writes_out_file(sample, tmp_path):
    edges, _ = sample
    out = tmp_path / "part.txt"
    assert main(["detect", "--edges", str(edges), "--method", "nb-eig", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 1501


def test_thresholds_json(capsys):
    assert main(["thresholds", "--ssbm", "2,5,1", "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert any(np.isclose(v, 16 / 12) for v in _numbers(report))


def _numbers(obj):
    if isinstance(obj, dict):
        for v in obj.values():
            yield from _numbers(v)
    elif isinstance(obj, list):
        for v in obj:
            yield from _numbers(v)
    elif isinstance(obj, (int, float)) and not isinstance(obj, bool):
        yield obj


def test_exact_csv(capsys):
    assert main(["exact", "--ssbm", "2,9,1", "--regime", "logarithmic", "--n", "1000",
                 "--trials", "2", "--seed", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "trial,seed,success,agreement,ties,status"
    assert len(lines) == 3 and all(l.endswith(",ok") for l in lines[1:])


def test_estimate_csv(sample, capsys):
    edges, _ = sample
    assert main(["estimate", "--input", str(edges), "--m", "3"]) in (0, 1)
    out = capsys.readouterr().out
    if out:
        header, row = out.splitlines()
        assert header == "d_hat,f_hat,a_hat,b_hat,m,cycles" and len(row.split(",")) == 6


def test_tree(capsys):
    assert main(["tree", "--offspring", "fixed:2", "--eps", "0.1", "--depth", "4",
                 "--trials", "20"]) == 0
    assert "bp_advantage = " in capsys.readouterr().out


def test_sweep_is_byte_identical(tmp_path):
    config = tmp_path / "sweep.json"
    config.write_text(json.dumps({"n": 400, "trials": 2, "methods": ["nb-eig", "adjacency"],
                                  "metrics": ["agreement"], "points": [{"k": 2, "a": 8, "b": 1}]}))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", "--config", str(config), "--out", str(a)]) == 0
    assert main(["--workers", "2", "sweep", "--config", str(config), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_sweep_with_failing_cells_exits_zero(tmp_path):
    config = tmp_path / "sweep.json"
    config.write_text(json.dumps({"n": 300, "methods": ["nope"], "points": [{"k": 2, "a": 8, "b": 1}]}))
    out = tmp_path / "o.csv"
    assert main(["sweep", "--config", str(config), "--out", str(out)]) == 0
    assert "error:ConfigError" in out.read_text()


def test_ingest(tmp_path, capsys):
    path = tmp_path / "tri.txt"
    path.write_text("0 1\n1 2\n0 2\n")
    assert main(["ingest", "--edges", str(path)]) == 0
    assert capsys.readouterr().out == "n = 3\nedges = 3\n"


def test_error_exit_codes(tmp_path, capsys):
    assert main(["detect", "--edges", str(tmp_path / "missing.txt")]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1\n0 x\n")
    assert main(["ingest", "--edges", str(bad)]) == 2
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"methods": ["abp"], "points": []}))
    assert main(["sweep", "--config", str(config)]) == 2
    assert main(["generate", "--ssbm", "2,5", "--n", "10"]) == 2
    assert "error:" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "sbmlab.cli", "thresholds", "--ssbm", "2,5,1"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout
