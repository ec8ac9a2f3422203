import json
import subprocess
import sys

import pytest

from tilekmc.cli import main
from tilekmc.complexity import ParamPoint
from tilekmc.sweep import RunRecord, run_id_for

SCHEMA = "tilekmc-config/1"


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def one_point(tmp_path):
    return write(tmp_path / "one.json", {"schema": SCHEMA, "lattice_side": 16, "steps": 800,
                                         "E_s": 0.5, "E_11": 0.5, "E_22": 0.5, "E_12": 1.0})


@pytest.fixture
def eight_points(tmp_path):
    return write(tmp_path / "eight.json", {"schema": SCHEMA, "sweep_id": "eight", "lattice_side": 12,
                                           "steps": 500, "E_s": [0.5, 1.0], "E_11": [0.1, 1.0],
                                           "E_22": 0.5, "E_12": [0.1, 1.0]})


def fake_manifest(path, C_of, n=6):
    lines = []
    for k in range(n):
        p = ParamPoint(0.5, 0.1, 0.1, round(0.1 * (k + 1), 1))
        r = RunRecord(run_id_for(p, 0), p, 0, C_bits=C_of(k), raw_len=100, ratio=C_of(k) / 800,
                      dist=0.1 * k)
        lines.append(json.dumps(r.to_dict()))
    path.write_text("\n".join(lines) + "\n")
    return str(path)


class TestSimulate:
    def test_writes_outputs(self, tmp_path, one_point, capsys):
        out = tmp_path / "o"
        assert main(["simulate", "--config", one_point, "--seed", "4", "--out", str(out)]) == 0
        text = capsys.readouterr().out
        assert "config:" in text and "seed: 4" in text
        rid = run_id_for(ParamPoint(0.5, 0.5, 0.5, 1.0), 4)
        for ext in (".png", ".raw", ".json"):
            assert (out / (rid + ext)).exists()
        rec = json.loads((out / (rid + ".json")).read_text())
        assert rec["seed"] == 4 and rec["tiles"] == 64

    def test_same_seed_same_png(self, tmp_path, one_point):
        for d in ("a", "b"):
            assert main(["simulate", "--config", one_point, "--seed", "1", "--out", str(tmp_path / d)]) == 0
        pa = sorted((tmp_path / "a").glob("*.png"))[0]
        assert pa.read_bytes() == (tmp_path / "b" / pa.name).read_bytes()

    def test_default_out_from_env(self, tmp_out, one_point):
        assert main(["simulate", "--config", one_point]) == 0
        assert list(tmp_out.glob("*.png"))

    def test_events(self, tmp_path, one_point):
        assert main(["simulate", "--config", one_point, "--out", str(tmp_path), "--events"]) == 0
        ev = next(tmp_path.glob("*.events.tsv")).read_text().splitlines()
        assert len(ev) == 801

    def test_custom_species(self, tmp_path):
        cfg = write(tmp_path / "c.json", {"schema": SCHEMA, "lattice_side": 12, "steps": 300, "E_s": 0.6,
                                          "species": [{"edge_labels": ["bromine"] * 4, "concentration": 1.0}]})
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
        rec = json.loads((tmp_path / "o" / "c_seed0.json").read_text())
        assert rec["params"] == {"E_s": 0.6, "custom": True}

    def test_errors(self, tmp_path, eight_points, capsys):
        assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == 1
        assert main(["simulate", "--config", eight_points, "--out", str(tmp_path)]) == 1
        assert main(["simulate", "--config", eight_points, "--frobnicate"]) == 1
        assert main(["dance"]) == 1
        assert "error" in capsys.readouterr().err


class TestSweep:
    def test_sweep_and_resume(self, tmp_path, eight_points, capsys):
        out = str(tmp_path / "o")
        assert main(["sweep", "--config", eight_points, "--out", out]) == 0
        manifest = tmp_path / "o" / "eight" / "manifest.jsonl"
        assert len(manifest.read_text().splitlines()) == 8
        assert "[8/8]" in capsys.readouterr().out
        assert main(["sweep", "--config", eight_points, "--out", out]) == 1
        assert main(["sweep", "--config", eight_points, "--out", out, "--resume"]) == 0
        assert "executed=0 skipped=8" in capsys.readouterr().out
        assert len(manifest.read_text().splitlines()) == 8

    def test_jobs_do_not_change_manifest(self, tmp_path, eight_points):
        for j in ("1", "4"):
            assert main(["sweep", "--config", eight_points, "--out", str(tmp_path / j), "--jobs", j]) == 0
        a = sorted((tmp_path / "1" / "eight" / "manifest.jsonl").read_text().splitlines())
        b = sorted((tmp_path / "4" / "eight" / "manifest.jsonl").read_text().splitlines())
        assert a == b

    def test_bad_config(self, tmp_path):
        cfg = write(tmp_path / "bad.json", {"schema": SCHEMA, "E_s": []})
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 1


class TestAnalyze:
    def test_correlation_monotone(self, tmp_path, capsys):
        m = fake_manifest(tmp_path / "m.jsonl", lambda k: 100 + 10 * k)
        assert main(["analyze", "--manifest", m, "--mode", "correlation"]) == 0
        rows = (tmp_path / "analysis" / "correlation.tsv").read_text().splitlines()
        assert rows[1].split("\t") == ["6", "1.0"]

    def test_transition_constant(self, tmp_path, capsys):
        m = fake_manifest(tmp_path / "m.jsonl", lambda k: 100)
        assert main(["analyze", "--manifest", m, "--mode", "transition", "--out", str(tmp_path / "a")]) == 0
        assert "no transition" in capsys.readouterr().out

    def test_ortho_known_deltas(self, tmp_path, capsys):
        m = fake_manifest(tmp_path / "m.jsonl", lambda k: [100, 120, 150, 140, 160, 170][k])
        assert main(["analyze", "--manifest", m, "--mode", "ortho", "--varied", "E_12", "--tau", "0.02"]) == 0
        rows = (tmp_path / "analysis" / "ortho_E_12.tsv").read_text().splitlines()
        cols = rows[1].split("\t")
        assert cols[4] == "reversed" and cols[-1] == "20,30,-10,20,10"

    def test_malformed_manifest(self, tmp_path):
        (tmp_path / "m.jsonl").write_text("{oops\n")
        assert main(["analyze", "--manifest", str(tmp_path / "m.jsonl"), "--mode", "ratio"]) == 1
        assert main(["analyze", "--manifest", str(tmp_path / "none.jsonl"), "--mode", "ratio"]) == 1

    def test_on_real_sweep(self, tmp_path, eight_points):
        assert main(["sweep", "--config", eight_points, "--out", str(tmp_path)]) == 0
        m = str(tmp_path / "eight" / "manifest.jsonl")
        assert main(["analyze", "--manifest", m, "--mode", "ratio", "--gallery"]) == 0
        a = tmp_path / "eight" / "analysis"
        assert (a / "gallery.png").read_bytes().startswith(b"\x89PNG")
        ratios = [float(x.split("\t")[-2]) for x in (a / "ratio.tsv").read_text().splitlines()[1:]]
        assert ratios == sorted(ratios) and len(ratios) == 8
        assert main(["analyze", "--manifest", m, "--mode", "ncd", "--jobs", "2"]) == 0
        rows = (a / "ncd.tsv").read_text().splitlines()
        assert len(rows) == 9 and len(rows[1].split("\t")) == 9
        assert main(["report", "--manifest", m]) == 0
        summary = json.loads((tmp_path / "eight" / "report" / "summary.json").read_text())
        assert summary["records"] == 8 and len(summary["ortho"]) == 4


class TestCluster:
    @pytest.fixture
    def mini(self, tmp_path):
        cfg = write(tmp_path / "mini.json", {"schema": SCHEMA, "sweep_id": "mini", "lattice_side": 12,
                                             "steps": 500, "E_s": 0.5, "E_11": [0.1, 0.5, 1.0],
                                             "E_22": [0.1, 0.5, 1.0], "E_12": [0.1, 0.5, 1.0]})
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 0
        return tmp_path / "mini" / "manifest.jsonl"

    def test_twenty_one_then_two(self, mini, capsys):
        assert main(["cluster", "--manifest", str(mini), "--metric", "ratio", "--k", "21", "--seed", "2"]) == 0
        reps = mini.parent / "cluster-ratio-k21" / "representatives.jsonl"
        assert len(reps.read_text().splitlines()) == 21
        assert main(["cluster", "--manifest", str(reps), "--metric", "ncd", "--k", "2"]) == 0
        rows = (reps.parent / "cluster-ncd-k2" / "assignments.tsv").read_text().splitlines()[1:]
        assert len(rows) == 21 and {r.split("\t")[1] for r in rows} == {"0", "1"}

    def test_k_one(self, mini):
        assert main(["cluster", "--manifest", str(mini), "--metric", "ratio", "--k", "1"]) == 0
        rows = (mini.parent / "cluster-ratio-k1" / "assignments.tsv").read_text().splitlines()[1:]
        assert {r.split("\t")[1] for r in rows} == {"0"}

    @pytest.mark.parametrize("k", ["0", "28"])
    def test_invalid_k(self, mini, k):
        assert main(["cluster", "--manifest", str(mini), "--metric", "ncd", "--k", k]) == 1


def test_console_entry_point(tmp_path, one_point):
    proc = subprocess.run([sys.executable, "-m", "tilekmc.cli", "simulate", "--config", one_point,
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "tilekmc.cli", "simulate"], capture_output=True, text=True)
    assert proc.returncode == 1
