import csv
import json

import numpy as np
import pytest

from selfcorrect.cli import main
from selfcorrect.io_formats import save_curves, save_transcript
from selfcorrect.simulator import Transcript
from selfcorrect.theory import AccuracyCurve, closed_form_curve, derive_params


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def demo_run(tmp_path):
    out = tmp_path / "sim"
    assert _run("simulate", "--profile", "demo", "--out", out) == 0
    return out


class TestSimulate:
    def test_defaults(self, demo_run, capsys):
        assert {p.name for p in demo_run.iterdir()} == {"transcript.jsonl", "curve.csv", "run.json"}
        rows = _rows(demo_run / "curve.csv")
        assert rows[0] == ["round", "empirical", "empirical_se"]
        assert [r[0] for r in rows[1:]] == [str(t) for t in range(6)]

    def test_reproducibility_stanza(self, demo_run):
        stanza = json.loads((demo_run / "run.json").read_text())
        assert stanza["command"] == "simulate" and stanza["seed"] == 0
        assert stanza["options"]["rounds"] == 5 and stanza["options"]["samples"] == 5

    def test_zero_rounds(self, tmp_path):
        assert _run("simulate", "--profile", "demo", "--rounds", 0, "--out", tmp_path) == 0
        rows = _rows(tmp_path / "curve.csv")
        assert len(rows) == 2 and rows[1][0] == "0"

    def test_deterministic(self, demo_run, tmp_path):
        _run("simulate", "--profile", "demo", "--workers", 3, "--out", tmp_path)
        for name in ("transcript.jsonl", "curve.csv"):
            assert (tmp_path / name).read_bytes() == (demo_run / name).read_bytes()

    def test_bad_profile(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("schema_version: 1\nquestions:\n  - {id: a, p0: 0.5, p_con: 1.2, p_cri: 0.3}\n")
        assert _run("simulate", "--profile", bad, "--out", tmp_path / "o") == 1
        assert "p_con" in capsys.readouterr().err


class TestPredict:
    def test_ascending(self, tmp_path, capsys):
        assert _run("predict", "--acc0", 0.5, "--cl", 0.9, "--cs", 0.3, "--out", tmp_path) == 0
        report = (tmp_path / "report.txt").read_text()
        assert report.splitlines()[0] == "Upp=0.75, alpha=0.6"
        assert "ascending" in report
        rows = _rows(tmp_path / "curve.csv")
        assert rows[-1][:2] == ["5", "0.73056"]

    def test_descending(self, tmp_path):
        _run("predict", "--acc0", 0.8, "--cl", 0.6, "--cs", 0.2, "--out", tmp_path)
        report = (tmp_path / "report.txt").read_text()
        assert "Upp=0.333333" in report and "descending" in report

    def test_degenerate(self, tmp_path):
        _run("predict", "--acc0", 0.4, "--cl", 1.0, "--cs", 0.0, "--out", tmp_path)
        report = (tmp_path / "report.txt").read_text()
        assert "constant" in report and "degenerate" in report
        assert {r[1] for r in _rows(tmp_path / "curve.csv")[1:]} == {"0.4"}

    def test_invalid_probability(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            _run("predict", "--acc0", 1.5, "--cl", 0.9, "--cs", 0.3, "--out", tmp_path)
        assert info.value.code != 0


class TestEstimate:
    def test_homogeneous(self, demo_run, tmp_path, capsys):
        out = tmp_path / "est"
        assert _run("estimate", "--transcript", demo_run / "transcript.jsonl", "--out", out) == 0
        first = (out / "report.txt").read_text().splitlines()[0]
        cl, cs = (float(part.split("=")[1]) for part in first.split(", ")[:2])
        # 2500 draws per round; 4 binomial SEs on each side
        assert abs(cl - 0.9) < 4 * np.sqrt(0.09 / 1250)
        assert abs(cs - 0.3) < 4 * np.sqrt(0.21 / 1250)
        stability = _rows(out / "stability.csv")
        assert len(stability) == 1 + 5
        assert len(_rows(out / "estimates.csv")) == 1 + 500

    def test_pooled(self, demo_run, tmp_path):
        assert _run("estimate", "--transcript", demo_run / "transcript.jsonl", "--pooled", "--out", tmp_path) == 0

    def test_all_correct(self, tmp_path, capsys):
        path = tmp_path / "t.jsonl"
        save_transcript(Transcript(np.ones((3, 2, 3), dtype=bool)), path)
        assert _run("estimate", "--transcript", path, "--out", tmp_path / "o") != 0
        err = capsys.readouterr().err
        assert "CS" in err and "wrong support=0" in err
        assert not (tmp_path / "o" / "report.txt").exists()

    def test_round_beyond_transcript(self, demo_run, tmp_path):
        with pytest.raises(SystemExit) as info:
            _run("estimate", "--transcript", demo_run / "transcript.jsonl", "--round", 5, "--out", tmp_path)
        assert info.value.code == 2

    def test_snapshots(self, tmp_path, capsys):
        path = tmp_path / "s.jsonl"
        rec = {
            "question_id": "q",
            "correct_label": 0,
            "prior": [0.4, 0.3, 0.2, 0.1],
            "transition": [
                [0.9, 0.05, 0.03, 0.02],
                [0.5, 0.3, 0.1, 0.1],
                [0.3, 0.2, 0.4, 0.1],
                [0.1, 0.3, 0.3, 0.3],
            ],
        }
        path.write_text(json.dumps(rec) + "\n")
        assert _run("estimate", "--snapshots", path, "--out", tmp_path / "n") == 0
        assert _run("estimate", "--snapshots", path, "--literal", "--out", tmp_path / "l") == 0
        normalized = (tmp_path / "n" / "report.txt").read_text()
        literal = (tmp_path / "l" / "report.txt").read_text()
        assert "CL=0.9, CS=0.366667" in normalized
        assert "CL=0.9, CS=0.22" in literal

    def test_needs_one_source(self, tmp_path):
        with pytest.raises(SystemExit):
            _run("estimate", "--out", tmp_path)


class TestFit:
    def test_round_trip(self, tmp_path, capsys):
        curve = closed_form_curve(derive_params(0.9, 0.3, 0.5), 10)
        save_curves([("theory", curve)], tmp_path / "c.csv")
        assert _run("fit", "--curve", tmp_path / "c.csv", "--out", tmp_path / "f") == 0
        fit = json.loads((tmp_path / "f" / "fit.json").read_text())
        # the table holds 6 significant digits, so that bounds the recovery
        assert fit["upp"] == pytest.approx(0.75, abs=1e-5)
        assert fit["alpha"] == pytest.approx(0.6, abs=1e-4)
        assert fit["acc0"] == pytest.approx(0.5, abs=1e-5)
        assert len(_rows(tmp_path / "f" / "fitted.csv")) == 12

    def test_flat(self, tmp_path, capsys):
        save_curves([("c", AccuracyCurve([0.4] * 6))], tmp_path / "c.csv")
        assert _run("fit", "--curve", tmp_path / "c.csv", "--out", tmp_path / "f") == 0
        assert json.loads((tmp_path / "f" / "fit.json").read_text())["flat"] is True
        assert "flat" in capsys.readouterr().err

    def test_descending_warns(self, tmp_path, capsys):
        save_curves([("c", closed_form_curve(derive_params(0.6, 0.2, 0.8), 8))], tmp_path / "c.csv")
        assert _run("fit", "--curve", tmp_path / "c.csv", "--out", tmp_path / "f") == 0
        assert json.loads((tmp_path / "f" / "fit.json").read_text())["descending"] is True
        assert "descending" in capsys.readouterr().err

    def test_short(self, tmp_path, capsys):
        save_curves([("c", AccuracyCurve([0.1, 0.2, 0.3]))], tmp_path / "c.csv")
        assert _run("fit", "--curve", tmp_path / "c.csv", "--out", tmp_path / "f") == 1
        assert "at least 4" in capsys.readouterr().err


class TestVerify:
    def test_corollary1(self, tmp_path, capsys):
        assert _run("verify", 1, "--profile", "demo", "--out", tmp_path) == 0
        report = (tmp_path / "report.txt").read_text()
        spread = float(report.strip().splitlines()[-1].split("=")[1])
        assert spread < 0.02
        assert _rows(tmp_path / "curves.csv")[0][1] == "acc0=0"
        assert len(_rows(tmp_path / "curves.csv")) == 12

    def test_corollary2(self, tmp_path, capsys):
        argv = ("verify", 2, "--profile", "fast", "--compare", "slow", "--epsilon", 1e-6, "--out", tmp_path)
        assert _run(*argv) == 0
        lines = (tmp_path / "report.txt").read_text().splitlines()
        assert lines[0].endswith("rounds_to_converge=9") and "alpha=0.2" in lines[0]
        assert lines[1].endswith("rounds_to_converge=125") and "alpha=0.9" in lines[1]

    def test_corollary2_needs_compare(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            _run("verify", 2, "--profile", "fast", "--out", tmp_path)
        assert info.value.code == 2

    def test_corollary3(self, tmp_path, capsys):
        assert _run("verify", 3, "--profile", "critique", "--out", tmp_path) == 0
        report = (tmp_path / "report.txt").read_text()
        assert "CS=0.5, Acc0=0" in report and "within_3se=true" in report
        rows = _rows(tmp_path / "curves.csv")
        assert {r[-1] for r in rows[1:]} == {"true"}

    def test_validation_failure(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("schema_version: 2\nquestions: []\n")
        assert _run("verify", 1, "--profile", bad, "--out", tmp_path / "o") == 1
