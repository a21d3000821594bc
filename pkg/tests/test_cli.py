import csv

import numpy as np
import pytest

from mfsir.cli import main

from conftest import synthetic_dataset, write_dataset, write_mulan


@pytest.fixture
def files(tmp_path):
    return write_dataset(synthetic_dataset(n=40, m=8), tmp_path)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_summarize(files, capsys):
    assert main(["summarize", *map(str, files)]) == 0
    header, row = capsys.readouterr().out.strip().splitlines()
    assert header == "name,n,m,q,lcard,lden"
    assert row.startswith("synthetic,40,8,4,")


def test_rank_and_evaluate(files, tmp_path, capsys):
    arff, xml = map(str, files)
    out = tmp_path / "rank.csv"
    assert main(["rank", "--dataset", arff, "--labels", xml, "--eta", "1e-3", "--varpi", "0.01",
                 "--tmax", "5", "--out", str(out), "--model-dir", str(tmp_path / "model"),
                 "--dump-graph", str(tmp_path / "graph")]) == 0
    rows = read_csv(out)
    assert [int(r["rank"]) for r in rows] == list(range(1, 9))
    assert sorted(int(r["feature_index"]) for r in rows) == list(range(8))
    scores = [float(r["score"]) for r in rows]
    assert scores == sorted(scores, reverse=True)
    hist = read_csv(tmp_path / "model" / "history.csv")
    G = np.loadtxt(tmp_path / "model" / "G.csv", delimiter=",", ndmin=2)
    assert G.shape == (8, 2) and 2 <= len(hist) <= 6
    assert (tmp_path / "graph" / "L.csv").is_file()

    ev = tmp_path / "eval.csv"
    assert main(["evaluate", "--dataset", arff, "--labels", xml, "--ranking", str(out),
                 "--fractions", "0.25,0.5", "--cv-folds", "2", "--knn-k", "5",
                 "--out", str(ev)]) == 0
    res = read_csv(ev)
    assert len(res) == 4
    assert list(res[0]) == ["dataset", "algorithm", "fraction", "fold", "hl", "rl", "mauc",
                            "mf1", "skipped_i", "skipped_l"]


def test_run_and_compare(files, tmp_path, capsys):
    arff, xml = files
    other = write_dataset(synthetic_dataset(n=40, m=8, seed=3, name="other"), tmp_path)
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"datasets = {arff}:{xml}, {other[0]}:{other[1]}\n"
                   "fractions = 0.25\ncv_folds = 2\nknn_k = 5\neta = 1e-3\nt_max = 10\n"
                   f"output_dir = {tmp_path / 'out'}\n")
    assert main(["run", "--config", str(cfg)]) == 0
    rows = read_csv(tmp_path / "out" / "results.csv")
    assert len(rows) == 2 * 3 * 2
    capsys.readouterr()
    assert main(["compare", "--results", str(tmp_path / "out" / "results.csv"), "--metric",
                 "mauc", "--out-dir", str(tmp_path / "cd")]) == 0
    report = capsys.readouterr().out
    assert "average ranks" in report and "chi2_F" in report
    assert (tmp_path / "cd" / "cd_diagram_mauc.csv").is_file()


def test_exit_codes(files, tmp_path):
    arff, xml = map(str, files)
    with pytest.raises(SystemExit) as info:
        main(["rank"])
    assert info.value.code == 1
    assert main(["rank", "--dataset", arff, "--labels", xml, "--latent-dim", "9"]) == 1
    assert main(["summarize", str(tmp_path / "missing.arff"), xml]) == 2
    bad = write_mulan(tmp_path, "@relation x\n@attribute a numeric\n@attribute l {0,1}\n"
                      "@data\n1,3\n", ["l"], name="bad")
    assert main(["summarize", *map(str, bad)]) == 2
    with np.errstate(all="ignore"):
        assert main(["rank", "--dataset", arff, "--labels", xml, "--eta", "100",
                     "--varpi", "1", "--beta", "0", "--out", str(tmp_path / "r.csv")]) == 3
    rows = tmp_path / "one.csv"
    rows.write_text("dataset,algorithm,status,hl\nD0,a,ok,0.1\nD0,b,ok,0.2\n")
    assert main(["compare", "--results", str(rows), "--metric", "hl"]) == 2
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("fractions = 2\n")
    assert main(["run", "--config", str(cfg)]) == 1
