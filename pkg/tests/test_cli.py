import csv
import io
import json

import pytest

from eiou.cli import main
from eiou.nms import read_detections


def run_cli(capsys, *args, stdin=None, monkeypatch=None):
    if stdin is not None:
        monkeypatch.setattr("sys.stdin", io.StringIO(stdin))
    code = main(list(args))
    out, err = capsys.readouterr()
    return code, out, err


class TestEval:
    def test_golden_rows(self, capsys, monkeypatch):
        text = "0,0,1,1 0.5,0.5,1.5,1.5\n# comment\n\n0,0,1,1;0,0,1,1\n0 0 1 1 2 0 3 1\n"
        code, out, _ = run_cli(capsys, "eval", stdin=text, monkeypatch=monkeypatch)
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert [r["line"] for r in rows] == ["1", "4", "5"]
        assert rows[0]["giou"] == "-0.079365079365079361"
        assert float(rows[0]["giou"]) == pytest.approx(-5 / 63, abs=1e-12)
        assert float(rows[0]["siou"]) == pytest.approx(1 / 7, abs=1e-12)
        assert rows[0]["overlap_class"] == "Overlapping"
        assert [rows[1][k] for k in ("siou", "eiou", "giou", "smooth_eiou_loss")] == ["1", "1", "1", "0"]
        assert rows[2]["overlap_class"] == "DisjointX"

    def test_file_and_out(self, capsys, tmp_path):
        src = tmp_path / "pairs.txt"
        src.write_text("0,0,1,1 0.5,0.5,1.5,1.5\n")
        dst = tmp_path / "out.csv"
        assert main(["eval", str(src), "--out", str(dst)]) == 0
        assert dst.read_text().startswith("line,siou,eiou,giou,smooth_eiou_loss,overlap_class\n")

    @pytest.mark.parametrize("text, line", [("0,0,1\n", 1), ("0,0,1,1 0,0,1,1\n\n0,0,1,1 a,0,1,1\n", 3),
                                            ("0,0,1,1 0,0,0,1\n", 1)])
    def test_bad_line(self, capsys, monkeypatch, text, line):
        code, out, err = run_cli(capsys, "eval", stdin=text, monkeypatch=monkeypatch)
        assert code == 2 and f"line {line}:" in err


class TestTrace:
    def test_single_to_file_is_reproducible(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["trace", "--name", "fig-convergence-smooth", "--out", str(a)]) == 0
        assert main(["trace", "--name", "fig-convergence-smooth", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert a.read_text().splitlines()[0].startswith("iter,x1,y1,x2,y2,ie,ue,eiou,loss")
        out = capsys.readouterr().out
        assert "PASS fig-convergence-smooth converged" in out

    def test_stdout_trace_and_stderr_verdicts(self, capsys):
        code, out, err = run_cli(capsys, "trace", "--name", "fig-sot-trapped-sot", "--format", "jsonl")
        assert code == 0
        assert json.loads(out.splitlines()[0])["iter"] == 0
        assert "PASS fig-sot-trapped-sot" in err

    def test_all_to_directory(self, capsys, tmp_path):
        assert main(["trace", "--out", str(tmp_path / "traces")]) == 0
        names = sorted(p.name for p in (tmp_path / "traces").iterdir())
        assert "fig-convergence-raw.csv" in names and len(names) == 13

    def test_failing_expectation_exits_one(self, capsys, tmp_path):
        f = tmp_path / "s.yaml"
        f.write_text("format: eiou-scenarios/1\nscenarios:\n  - name: x\n    alpha: 0.005\n"
                     "    target: [0, 0, 1, 1]\n    init: [0, 0, 4, 4]\n    mode: plain\n"
                     "    expect: {converged: true}\n")
        code, _, err = run_cli(capsys, "trace", str(f))
        assert code == 1 and "FAIL x converged" in err

    def test_unknown_name(self, capsys):
        code, _, err = run_cli(capsys, "trace", "--name", "nope")
        assert code == 2 and "nope" in err

    def test_bad_file(self, capsys, tmp_path):
        f = tmp_path / "s.yaml"
        f.write_text("format: eiou-scenarios/1\nscenarios:\n  - name: x\n")
        code, _, err = run_cli(capsys, "trace", str(f))
        assert code == 2 and "line 3" in err


class TestSweep:
    def test_byte_identical(self, capsys):
        args = ["sweep", "--n", "20", "--seed", "4", "--max-iters", "200"]
        _, a, _ = run_cli(capsys, *args)
        _, b, _ = run_cli(capsys, *args, "--workers", "2")
        assert a == b
        d = json.loads(a)
        assert set(d["variants"]) == {"sot", "plain"} and d["n"] == 20

    def test_single_pair(self, capsys):
        code, out, _ = run_cli(capsys, "sweep", "--n", "1", "--modes", "sot", "--max-iters", "50")
        assert code == 0 and list(json.loads(out)["variants"]) == ["sot"]

    def test_bad_loss(self, capsys):
        code, _, err = run_cli(capsys, "sweep", "--n", "1", "--loss", "nope")
        assert code == 2


class TestGradcheck:
    def test_pass(self, capsys):
        code, out, _ = run_cli(capsys, "gradcheck", "--samples", "200")
        assert code == 0 and json.loads(out)["pass"] is True

    def test_fail_exit(self, capsys):
        code, out, _ = run_cli(capsys, "gradcheck", "--samples", "50", "--tol", "1e-15")
        assert code == 1 and json.loads(out)["pass"] is False

    def test_oversized_step(self, capsys):
        code, _, err = run_cli(capsys, "gradcheck", "--samples", "5", "--step", "0.5")
        assert code == 2 and "too large" in err


class TestSearches:
    def test_misalign(self, capsys):
        code, out, _ = run_cli(capsys, "misalign")
        d = json.loads(out)
        assert code == 0 and d["verified"] and d["smooth_l1_a"] > d["smooth_l1_b"] and d["iou_a"] > d["iou_b"]

    def test_giou_anomaly(self, capsys):
        code, out, _ = run_cli(capsys, "giou-anomaly")
        d = json.loads(out)
        assert code == 0 and d["overlapping"]["giou"] < 0 < d["overlapping"]["eiou"]
        assert d["touching"]["giou"] == 0.0

    def test_not_found_exit(self, capsys):
        code, _, err = run_cli(capsys, "misalign", "--max-samples", "5", "--range", "0", "0.0005")
        assert code == 1 and "not found" in err

    def test_bad_budget(self, capsys):
        code, _, _ = run_cli(capsys, "giou-anomaly", "--max-samples", "0")
        assert code == 2


class TestNMSSim:
    def test_bundled(self, capsys, tmp_path):
        dump = tmp_path / "d.csv"
        code, out, _ = run_cli(capsys, "nms-sim", "--dump-detections", str(dump))
        d = json.loads(out)
        assert code == 0 and d["clusters"] == 50
        assert d["predicted-iou"]["mean_iou"] >= d["classification"]["mean_iou"]
        with open(dump) as fh:
            assert len(read_detections(fh)) == d["candidates"]
        _, again, _ = run_cli(capsys, "nms-sim", "--detections", str(dump))
        assert again == out

    def test_empty_cluster_file(self, capsys, tmp_path):
        f = tmp_path / "c.yaml"
        f.write_text("format: eiou-clusters/1\nclusters: []\n")
        code, _, err = run_cli(capsys, "nms-sim", str(f))
        assert code == 2 and "no clusters" in err

    def test_noise_override(self, capsys):
        _, clean, _ = run_cli(capsys, "nms-sim")
        _, noisy, _ = run_cli(capsys, "nms-sim", "--iou-noise", "0.4")
        assert json.loads(noisy)["predicted-iou"]["mean_iou"] < json.loads(clean)["predicted-iou"]["mean_iou"]


def test_usage_error_exits_two(capsys):
    with pytest.raises(SystemExit) as info:
        main(["eval", "--nope"])
    assert info.value.code == 2
