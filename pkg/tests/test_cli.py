import csv
import json

import numpy as np
import pytest

from hamattn.attention import load_params
from hamattn.cli import EXIT_BUDGET, EXIT_FAIL, EXIT_OK, EXIT_USAGE, main


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_verify_pass(tmp_path, capsys):
    out = tmp_path / "v"
    argv = ["verify", "--n", "2", "--d", "1", "--delta", "1/2", "--out", str(out)]
    assert main(argv) == EXIT_OK
    assert capsys.readouterr().out.startswith("PASS")
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["passed"] and cert["inputs"] == 4
    m = manifest(out)
    assert m["command"] == "verify" and m["argv"] == argv and m["status"] == "ok"
    assert m["schema_version"] == 1 and m["wall_time"] >= 0
    assert m["outputs"] == [str(out / "certificate.json")]


def test_verify_skip_allmax_fails(tmp_path, capsys):
    out = tmp_path / "v"
    code = main(["verify", "--n", "2", "--d", "1", "--delta", "1/2", "--skip-allmax",
                 "--out", str(out)])
    assert code == EXIT_FAIL
    text = capsys.readouterr().out
    assert text.startswith("FAIL") and "witness" in text
    assert manifest(out)["status"] == "fail"


def test_verify_usage_errors(tmp_path, capsys):
    out = str(tmp_path / "v")
    assert main(["verify", "--n", "2", "--d", "1", "--delta", "2/3", "--out", out]) == EXIT_USAGE
    assert "error" in capsys.readouterr().err
    assert main(["verify", "--n", "2", "--d", "1", "--delta", "half", "--out", out]) == EXIT_USAGE
    assert main(["verify", "--n", "2"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE


def test_verify_budget(tmp_path, capsys):
    out = tmp_path / "v"
    code = main(["verify", "--n", "5", "--d", "3", "--delta", "1/2", "--out", str(out)])
    assert code == EXIT_BUDGET
    assert "budget" in capsys.readouterr().err
    assert manifest(out)["status"] == "budget-exceeded"


def test_coverage(tmp_path, capsys):
    out = tmp_path / "c"
    assert main(["coverage", "--n", "12", "--ns", "4", "--samples", "500", "--seed", "1",
                 "--out", str(out)]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["expected_frequency"] == pytest.approx(2 / 11)
    assert summary["total_edges"] == 12 * 500
    rows = list(csv.DictReader(open(out / "coverage.csv")))
    assert len(rows) == 66
    assert manifest(out)["seed"] == 1
    assert main(["coverage", "--n", "10", "--ns", "4", "--out", str(out)]) == EXIT_USAGE


def test_bench(tmp_path):
    out = tmp_path / "b"
    assert main(["bench", "--n", "16,32", "--kinds", "dense,sampled,sparse-hamiltonian,knn",
                 "--repeats", "2", "--h", "2", "--m", "4", "--d", "8", "--r", "8", "--k", "3",
                 "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(open(out / "bench.csv")))
    assert len(rows) == 8
    got = {(int(r["n"]), r["kind"]): int(r["scores"]) for r in rows}
    assert got[(16, "dense")] == 256 and got[(32, "dense")] == 1024
    assert got[(16, "sampled")] == 4 * 9 and got[(32, "sampled")] == 8 * 9
    assert got[(16, "sparse-hamiltonian")] == 31 and got[(16, "knn")] == 48
    assert all(int(r["scores_all_heads"]) == 2 * int(r["scores"]) for r in rows)
    assert all(float(r["wall_mean"]) > 0 for r in rows)


def test_bench_errors(tmp_path):
    out = str(tmp_path / "b")
    assert main(["bench", "--n", "16", "--kinds", "conv", "--out", out]) == EXIT_USAGE
    assert main(["bench", "--n", "18", "--kinds", "sampled", "--out", out]) == EXIT_USAGE
    assert main(["bench", "--n", "x", "--out", out]) == EXIT_USAGE


def _config(tmp_path, body):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(body))
    return str(path)


TINY = {"train": {"epochs": 1, "batch_size": 4, "h": 1, "m": 2, "d": 4, "r": 4, "kind": "sampled"},
        "data": {"synthetic": {"points_per_cloud": 16}, "count_per_class": 3,
                 "test_fraction": 0.34}}


def test_train(tmp_path, capsys):
    out = tmp_path / "t"
    assert main(["train", "--config", _config(tmp_path, TINY), "--seed", "4",
                 "--out", str(out)]) == EXIT_OK
    assert "epoch 1 test" in capsys.readouterr().out
    rows = list(csv.DictReader(open(out / "metrics.csv")))
    assert [r["split"] for r in rows] == ["train", "test"]
    params, extra = load_params(out / "checkpoint.npz")
    assert params.h == 1 and "W_c" in extra
    m = manifest(out)
    assert m["seed"] == 4 and m["config"]["train"]["seed"] == 4
    assert m["config"]["train"]["kind"] == "sampled"


def test_train_flag_overrides_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = _config(tmp_path, TINY)
    for out in (a, b):
        assert main(["train", "--config", cfg, "--kind", "dense", "--out", str(out)]) == EXIT_OK
    assert (a / "metrics.csv").read_text() == (b / "metrics.csv").read_text()
    pa, _ = load_params(a / "checkpoint.npz")
    pb, _ = load_params(b / "checkpoint.npz")
    np.testing.assert_array_equal(pa.W_V, pb.W_V)


@pytest.mark.parametrize("body, needle", [
    ({"train": {"epochz": 1}}, "train.epochz: unknown field"),
    ({"train": {"epochs": "one"}}, "train.epochs: expected int"),
    ({"train": {"kind": "conv"}}, "train:"),
    ({"data": {"foo": 1}}, "data.foo: unknown field"),
    ({"data": {"synthetic": {"radius": 2}}}, "data.synthetic.radius: unknown field"),
    ({"model": {}}, "unknown section"),
])
def test_train_config_errors(tmp_path, capsys, body, needle):
    assert main(["train", "--config", _config(tmp_path, body),
                 "--out", str(tmp_path / "t")]) == EXIT_USAGE
    assert needle in capsys.readouterr().err


def test_train_bad_json_and_missing(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{\n  oops")
    assert main(["train", "--config", str(bad), "--out", str(tmp_path / "t")]) == EXIT_USAGE
    assert "line 2" in capsys.readouterr().err
    assert main(["train", "--config", str(tmp_path / "none.json"),
                 "--out", str(tmp_path / "t")]) == EXIT_USAGE


def test_train_missing_manifest(tmp_path, capsys):
    cfg = _config(tmp_path, {"train": {"epochs": 1}, "data": {"manifest": "nope.csv"}})
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "t")]) == EXIT_USAGE
    assert "data:" in capsys.readouterr().err


def test_version(capsys):
    assert main(["--version"]) == EXIT_OK
    assert "hamattn" in capsys.readouterr().out
