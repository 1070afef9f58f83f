import filecmp
import json
import subprocess
import sys

import pytest

from voropart.cli import main


def run(tmp, *argv):
    return main([*argv, "--out", str(tmp)])


@pytest.fixture(scope="module")
def objects(tmp_path_factory):
    d = tmp_path_factory.mktemp("gen")
    assert main(["gen", "uniform", "--n", "6000", "--extent", "1000000", "--seed", "7",
                 "--out", str(d), "--output", "u.bin"]) == 0
    return d / "u.bin"


def _pipeline(out, objects):
    common = ["--seed", "7", "--workers", "1", "--extent", "1000000"]
    assert run(out, "build", "--objects", str(objects), "--nodes", "4", "--sample", "200", "--lam", "auto", *common) == 0
    assert run(out, "query", "--objects", str(objects), "--nodes", "4", "--sample", "200", "--count", "30",
               "--knn-count", "20", *common) == 0
    assert run(out, "ceps", "--objects", str(objects), "--max-objects", "100", "--buckets", "48", *common) == 0
    assert run(out, "iceps", "--objects", str(objects), "--max-objects", "100", "--buckets", "48",
               "--ratios", "0.01,0.05", *common) == 0
    assert run(out, "oracle", "--points", "500", "--nodes", "3", "--queries", "10", *common) == 0


def test_outputs_are_byte_identical(tmp_path, objects):
    a, b = tmp_path / "a", tmp_path / "b"
    _pipeline(a, objects)
    _pipeline(b, objects)
    names = sorted(p.name for p in a.iterdir() if p.name != "timing.json")
    assert {"report.json", "report.csv", "results.csv", "clustering.json", "cost.csv", "transfer.csv",
            "oracle.json"} <= set(names)
    _, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert not mismatch and not errors


def test_headers_carry_seed(tmp_path, objects):
    assert run(tmp_path, "build", "--objects", str(objects), "--nodes", "2", "--sample", "100",
               "--seed", "3", "--extent", "1000000") == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["header"]["seed"] == 3 and rep["header"]["command"] == "build"
    first = (tmp_path / "report.csv").read_text().splitlines()[0]
    assert first.startswith("# ") and "seed=3" in first
    assert "times" not in rep and (tmp_path / "timing.json").exists()


def test_stdout_mode(objects, capsys, tmp_path):
    assert main(["build", "--objects", str(objects), "--nodes", "2", "--sample", "100", "--extent", "1000000",
                 "--stdout", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "shuffle" in out
    assert not any(tmp_path.iterdir())


def test_missing_file_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as e:
        run(tmp_path, "build", "--objects", str(tmp_path / "nope.bin"))
    assert e.value.code == 2


def test_unknown_flag_exits_nonzero():
    r = subprocess.run([sys.executable, "-m", "voropart.cli", "build", "--bogus"], capture_output=True)
    assert r.returncode == 2


def test_selectivity_preset_in_results(tmp_path, objects):
    assert run(tmp_path, "query", "--objects", str(objects), "--nodes", "2", "--sample", "100",
               "--selectivity", "small", "--count", "5", "--extent", "1000000") == 0
    text = (tmp_path / "results.csv").read_text()
    assert "range" in text
