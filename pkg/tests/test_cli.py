import os

import pytest

from ilb.cli import main, read_predictions, write_atomic
from ilb.logic import parse_program


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "small.cfg").write_text("rounds = 3\ninstances_per_core_form = 300\n")
    for tag, seed in (("a", 0), ("b", 1)):
        assert main(["synth", "--out-dir", str(tmp_path / tag), "--entities", "12", "--tag", tag,
                     "--seed", str(seed)]) == 0
    return tmp_path


def pipeline(d, name):
    cfg = str(d / "small.cfg")
    model, pred, report = (str(d / f"{name}.{ext}") for ext in ("json", "tsv", "txt"))
    assert main(["train", "--facts", str(d / "a/facts.pl"), "--pos", str(d / "a/pos.pl"),
                 "--config", cfg, "--seed", "3", "--model", model]) == 0
    assert main(["predict", "--model", model, "--facts", str(d / "b/facts.pl"), "--out", pred]) == 0
    assert main(["eval", "--pred", pred, "--pos", str(d / "b/pos.pl"), "--out", report,
                 "--curves", str(d / name)]) == 0
    return model, pred, report


class TestPipeline:
    def test_end_to_end_determinism(self, workdir, capsys):
        m1, p1, r1 = pipeline(workdir, "one")
        m2, p2, r2 = pipeline(workdir, "two")
        for a, b in ((m1, m2), (p1, p2), (r1, r2)):
            assert open(a).read() == open(b).read()
        assert "AUC-PR" in capsys.readouterr().out
        assert os.path.exists(workdir / "one.rules.pl")
        assert os.path.exists(workdir / "one.roc.tsv") and os.path.exists(workdir / "one.pr.tsv")
        kv = dict(line.split("=") for line in open(r1 + ".kv").read().splitlines())
        assert 0.0 <= float(kv["auc_pr"]) <= 1.0

    def test_predictions_tsv(self, workdir):
        _, pred, _ = pipeline(workdir, "p")
        lines = open(pred).read().splitlines()
        scores = [float(line.split("\t")[1]) for line in lines]
        assert scores == sorted(scores, reverse=True)
        assert all(0.0 <= s <= 1.0 for s in scores)
        assert len(read_predictions(open(pred).read())) == len(lines)

    def test_export_rules(self, workdir):
        model, _, _ = pipeline(workdir, "x")
        out = workdir / "rules.pl"
        assert main(["export-rules", "--model", model, "--out", str(out)]) == 0
        rules = parse_program(out.read_text())
        assert rules and all(r.range_restricted() for r in rules)
        assert out.read_text() == (workdir / "x.rules.pl").read_text()

    def test_only_queries(self, workdir):
        model, _, _ = pipeline(workdir, "q")
        (workdir / "q.pl").write_text("sameauthor(nobody,noone).\n")
        out = workdir / "q.out"
        assert main(["predict", "--model", model, "--facts", str(workdir / "b/facts.pl"),
                     "--query", str(workdir / "q.pl"), "--only-queries", "--out", str(out)]) == 0
        assert out.read_text().startswith("sameauthor(nobody,noone)\t")

    def test_gen_instances(self, workdir):
        out = workdir / "table.tsv"
        assert main(["gen-instances", "--facts", str(workdir / "a/facts.pl"), "--pos", str(workdir / "a/pos.pl"),
                     "--config", str(workdir / "small.cfg"), "--out", str(out)]) == 0
        first = out.read_text().splitlines()[0].split("\t")
        assert first[0].startswith("sameauthor(V0,V1) :- ")

    def test_cross_validation(self, workdir, capsys):
        out = workdir / "cv.txt"
        assert main(["cv", "--fold", str(workdir / "a"), "--fold", str(workdir / "b"),
                     "--config", str(workdir / "small.cfg"), "--out", str(out)]) == 0
        text = out.read_text()
        assert text.count("fold ") == 2 and "mean: AUC-PR" in text


class TestErrors:
    def test_parse_error(self, workdir, capsys):
        bad = workdir / "bad.pl"
        bad.write_text("hasword(a,b).\nhasword(a\n")
        model = workdir / "never.json"
        rc = main(["train", "--facts", str(bad), "--pos", str(workdir / "a/pos.pl"), "--model", str(model)])
        assert rc != 0
        assert "line 2" in capsys.readouterr().err
        assert not model.exists()

    def test_config_error(self, workdir, capsys):
        cfg = workdir / "bad.cfg"
        cfg.write_text("depth = 3\n")
        rc = main(["train", "--facts", str(workdir / "a/facts.pl"), "--pos", str(workdir / "a/pos.pl"),
                   "--config", str(cfg), "--model", str(workdir / "m.json")])
        assert rc != 0 and "unknown key" in capsys.readouterr().err

    def test_missing_file(self, workdir, capsys):
        assert main(["export-rules", "--model", str(workdir / "nope.json"), "--out", str(workdir / "r")]) != 0
        assert "ilb: error" in capsys.readouterr().err

    def test_cv_needs_two_folds(self, workdir):
        assert main(["cv", "--fold", str(workdir / "a")]) != 0

    def test_no_partial_write(self, tmp_path):
        target = tmp_path / "out.txt"
        target.write_text("old\n")
        with pytest.raises(TypeError):
            write_atomic(target, None)
        assert target.read_text() == "old\n"
        assert os.listdir(tmp_path) == ["out.txt"]
