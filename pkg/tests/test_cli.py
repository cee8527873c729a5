import csv
import json

import numpy as np
import pytest

from rbp.cli import main
from rbp.io import ParseError, read_edges, read_regression_csv
from rbp.partition import Partition
from rbp.synthetic import planted_communities, regression_boxes


@pytest.fixture(autouse=True)
def in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def write_regression(path, n, seed):
    X, y = regression_boxes(n, np.random.default_rng(seed))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "x2", "y"])
        w.writerows(np.column_stack([X, y]).tolist())


def write_edges(path, A):
    with open(path, "w") as fh:
        fh.write("i,j,v\n")
        for i, j in zip(*np.nonzero(A)):
            fh.write(f"{i},{j},1\n")


def test_sample_reproducible(capsys):
    args = ["sample", "--tau", "1", "--lambda", "2", "--lengths", "1,1", "--seed", "7", "--n", "3"]
    assert main(args + ["--out", "a.json"]) == 0
    first = open("a.json", "rb").read()
    assert main(args + ["--out", "a.json"]) == 0
    assert open("a.json", "rb").read() == first
    doc = json.loads(first)
    assert len(doc["partitions"]) == 3
    parts = [Partition.from_dict(d) for d in doc["partitions"]]
    assert all(p.tau == 1.0 and p.domain.lengths == (1.0, 1.0) for p in parts)
    assert doc["config"]["seed"] == 7

    assert main(args) == 0
    assert json.loads(capsys.readouterr().out)["partitions"] == doc["partitions"]


def test_sample_lambda_zero_full_boxes():
    assert main(["sample", "--lambda", "0", "--lengths", "2,3", "--n", "5", "--out", "z.json"]) == 0
    for d in json.load(open("z.json"))["partitions"]:
        for b in d["boxes"]:
            assert b["start"] == [0.0, 0.0] and b["len"] == [2.0, 3.0]
            assert b["start_atom"] == [True, True] and b["end_atom"] == [True, True]


def test_sample_mean_box_count():
    assert main(["sample", "--tau", "3", "--lambda", "0.99", "--n", "2000", "--seed", "2", "--out", "m.json"]) == 0
    counts = [len(d["boxes"]) for d in json.load(open("m.json"))["partitions"]]
    rate = 3 * 1.99 ** 2
    assert abs(np.mean(counts) - rate) < 3 * np.sqrt(rate / len(counts))


def test_sample_svg(in_tmp):
    assert main(["sample", "--n", "2", "--seed", "1", "--out", "s.json", "--svg", "pic.svg"]) == 0
    for i in range(2):
        text = (in_tmp / f"pic_{i}.svg").read_text()
        assert text.startswith("<svg") and 'viewBox="0 0 100.0 100.0"' in text
    assert main(["sample", "--lengths", "1", "--svg", "x.svg"]) == 2


def test_config_precedence():
    with open("cfg.json", "w") as fh:
        json.dump({"tau": 5.0, "lambda": 0.0, "n": 2}, fh)
    assert main(["sample", "--config", "cfg.json", "--tau", "2", "--out", "c.json"]) == 0
    doc = json.load(open("c.json"))
    assert doc["config"]["tau"] == 2.0 and doc["config"]["lambda"] == 0.0 and doc["config"]["n"] == 2
    with open("bad.json", "w") as fh:
        json.dump({"taux": 1}, fh)
    assert main(["sample", "--config", "bad.json"]) == 2


def test_bad_seed_and_params():
    assert main(["sample", "--seed", "-1"]) == 2
    assert main(["sample", "--seed", str(2 ** 64)]) == 2
    assert main(["sample", "--tau", "0"]) == 2
    with pytest.raises(SystemExit) as e:
        main(["sample", "--bogus"])
    assert e.value.code == 2


def test_fit_regression(in_tmp, capsys):
    write_regression("train.csv", 60, 0)
    write_regression("test.csv", 20, 1)
    args = ["fit-regression", "train.csv", "--test", "test.csv", "--iters", "40", "--seed", "3", "--out", "fit"]
    assert main(args) == 0
    assert "RMAE" in capsys.readouterr().out
    summary = json.load(open("fit/summary.json"))
    assert summary["n_samples"] == 20 and 0 <= summary["rmae"] < 1.0
    lines = open("fit/posterior.jsonl").read().splitlines()
    assert json.loads(lines[0])["config"]["iters"] == 40
    assert len(lines) == 21 and "weights" in json.loads(lines[1])
    preds = open("fit/test_predictions.csv").read().splitlines()
    assert preds[0].startswith("# config: ") and preds[1] == "x1,x2,y,prediction"
    first = open("fit/posterior.jsonl", "rb").read()
    assert main(args) == 0
    assert open("fit/posterior.jsonl", "rb").read() == first


def test_fit_regression_parallel_chains_match_serial():
    write_regression("train.csv", 30, 0)
    base = ["fit-regression", "train.csv", "--iters", "10", "--chains", "2", "--seed", "4"]
    assert main(base + ["--out", "serial"]) == 0
    assert main(base + ["--jobs", "2", "--out", "par"]) == 0
    strip = lambda p: open(p).read().splitlines()[1:]
    assert strip("serial/posterior.jsonl") == strip("par/posterior.jsonl")


def test_fit_regression_single_row():
    with open("one.csv", "w") as fh:
        fh.write("x,y\n0.5,1.25\n")
    assert main(["fit-regression", "one.csv", "--iters", "20", "--out", "one"]) == 0


def test_fit_regression_parse_errors(capsys):
    with open("nolabel.csv", "w") as fh:
        fh.write("x\n0.5\n")
    assert main(["fit-regression", "nolabel.csv"]) == 2
    with open("bad.csv", "w") as fh:
        fh.write("x,y\n0.5,1\n0.2,abc\n")
    assert main(["fit-regression", "bad.csv"]) == 2
    assert "line 3" in capsys.readouterr().err
    assert main(["fit-regression", "missing.csv"]) == 1


def test_read_helpers():
    with open("c.csv", "w") as fh:
        fh.write("# comment\na,b,c\n1,2,3\n4,5,6\n")
    header, X, y = read_regression_csv("c.csv")
    assert header == ["a", "b", "c"] and X.shape == (2, 2) and list(y) == [3, 6]
    with open("e.csv", "w") as fh:
        fh.write("0,1,1\n2,0,0\n")
    n, A = read_edges("e.csv")
    assert n == 3 and A[0, 1] == 1 and A.sum() == 1
    with open("e2.csv", "w") as fh:
        fh.write("0,1,5\n")
    with pytest.raises(ParseError, match="line 1"):
        read_edges("e2.csv")
    with pytest.raises(ParseError):
        read_edges("e.csv", n_nodes=2)


def test_fit_relational(capsys):
    A, _ = planted_communities(12, np.random.default_rng(0))
    write_edges("g.csv", A)
    assert main(["fit-relational", "g.csv", "--iters", "20", "--holdout", "0.2", "--out", "rel"]) == 0
    assert "AUC" in capsys.readouterr().out
    summary = json.load(open("rel/summary.json"))
    assert 0 <= summary["auc"] <= 1
    rows = open("rel/scores.csv").read().splitlines()
    assert rows[1] == "i,j,label,score" and len(rows) == 2 + round(0.2 * 144)


def test_fit_relational_no_holdout():
    A, _ = planted_communities(8, np.random.default_rng(0))
    write_edges("g.csv", A)
    assert main(["fit-relational", "g.csv", "--iters", "5", "--holdout", "0", "--out", "rel0"]) == 0
    assert "auc" not in json.load(open("rel0/summary.json"))
    assert len(open("rel0/scores.csv").read().splitlines()) == 2 + 64


def test_fit_relational_all_zero_graph(capsys):
    with open("z.csv", "w") as fh:
        fh.write("i,j,v\n0,0,0\n")
    assert main(["fit-relational", "z.csv", "--n-nodes", "6", "--iters", "5", "--out", "z"]) == 1
    assert "positive" in capsys.readouterr().err


def test_verify_lines_and_exit(capsys):
    assert main(["verify", "--checks", "volume,coverage", "--seed", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [json.loads(l)["name"] for l in lines] == ["volume", "coverage"]
    assert main(["verify", "--checks", "self-consistency", "--case", "terminal", "--samples", "2000"]) == 0
    assert [json.loads(l)["name"] for l in capsys.readouterr().out.splitlines()] == ["self-consistency:terminal"]


def test_verify_usage_errors():
    assert main(["verify", "--checks", ""]) == 2
    assert main(["verify", "--checks", "volume,nothing"]) == 2


def test_verify_failure_exit_code(monkeypatch):
    from rbp import sampler
    real = sampler.sample_dims
    monkeypatch.setattr(sampler, "sample_dims",
                        lambda lam, L, size, r: (lambda s, l, a, b: (s, np.minimum(2 * l, L - s), a, b))(*real(lam, L, size, r)))
    assert main(["verify", "--checks", "volume", "--samples", "20000", "--out", "v.json"]) == 3
    rep = json.loads(open("v.json").read())
    assert rep["passed"] is False and rep["n_samples"] == 200_000
