import csv
import json

import numpy as np

from impulseflow.cli import main

from oracles import annulus_impulse_schedule


def run_cli(*args) -> int:
    return main(list(args))


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


class TestValidation:
    def test_unknown_system_exits_2(self, tmp_path, capsys):
        rc = run_cli("simulate", "--system", "torus", "--out", str(tmp_path))
        assert rc == 2
        assert "system.name" in capsys.readouterr().err

    def test_malformed_config_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        rc = run_cli("simulate", "--config", str(bad), "--out", str(tmp_path))
        assert rc == 2

    def test_missing_system_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text("{}")
        rc = run_cli("simulate", "--config", str(cfg), "--out", str(tmp_path))
        assert rc == 2
        assert "system.name" in capsys.readouterr().err

    def test_bad_schema_version(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"schema_version": 99,
                                   "system": {"name": "annulus"}}))
        assert run_cli("simulate", "--config", str(cfg),
                       "--out", str(tmp_path)) == 2


class TestSimulate:
    def test_annulus_schedule(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({
            "system": {"name": "annulus"},
            "params": {"horizon": 40.0, "dt_sample": 0.05,
                       "initial_state": [0.0, 1.5]},
        }))
        out = tmp_path / "run"
        assert run_cli("simulate", "--config", str(cfg), "--out", str(out)) == 0
        with open(out / "impulses.csv") as fh:
            rows = list(csv.DictReader(fh))
        taus = np.array([float(r["tau_n"]) for r in rows])
        exp, _ = annulus_impulse_schedule(1.5, np.pi / 2, len(taus))
        assert np.abs(taus - exp).max() < 1e-8
        with open(out / "trajectory.csv") as fh:
            header = fh.readline().strip()
        assert header == "t,x1,x2,segment_index,is_impulse"
        manifest = read_json(out / "manifest.json")
        assert manifest["experiment"] == "simulate"
        assert manifest["resolved_config"]["system"]["name"] == "annulus"
        assert "artifact_version" in manifest


class TestHypothesesExperiment:
    def test_prey_predator_passes(self, tmp_path):
        out = tmp_path / "run"
        assert run_cli("check-hypotheses", "--system", "prey_predator",
                       "--out", str(out)) == 0
        rep = read_json(out / "hypotheses.json")
        assert rep["pass"] is True
        assert rep["transversality_D"]["common_sign"] == -1
        assert rep["transversality_D"]["min_abs_inner"] > 1e-3
        assert rep["separation"]["dist_D_ID"] > 0.5
        assert len(rep["continuity_table"]) >= 3

    def test_degenerate_fails(self, tmp_path):
        out = tmp_path / "run"
        assert run_cli("check-hypotheses", "--system", "tangent_degenerate",
                       "--out", str(out)) == 0
        rep = read_json(out / "hypotheses.json")
        assert rep["pass"] is False


class TestMeasureExperiment:
    def test_grid_flag_and_outputs(self, tmp_path):
        out = tmp_path / "run"
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({
            "system": {"name": "annulus"},
            "params": {"horizon": 150.0, "dt_sample": 0.01, "t_shift": 1.0,
                       "initial_state": [0.0, 1.5]},
        }))
        rc = run_cli("measure", "--config", str(cfg), "--out", str(out),
                     "--grid=-2:2:20,-2:2:20")
        assert rc == 0
        with open(out / "measure.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 400
        total = sum(float(r["weight"]) for r in rows)
        assert abs(total - 1.0) < 1e-9
        manifest = read_json(out / "manifest.json")
        assert manifest["results"]["pushforward_discrepancy"] < 0.05

    def test_runtime_failure_removes_outputs(self, tmp_path, capsys):
        out = tmp_path / "run"
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({
            "system": {"name": "annulus"},
            "params": {"horizon": 60.0, "dt_sample": 0.01,
                       "initial_state": [0.0, 1.5],
                       "grid": "5:6:10,5:6:10"},   # box far from the orbit
        }))
        rc = run_cli("measure", "--config", str(cfg), "--out", str(out))
        assert rc == 1
        assert not (out / "measure.csv").exists()
        assert not (out / "manifest.json").exists()


class TestQuotientExperiment:
    def test_outputs_and_symmetry(self, tmp_path):
        out = tmp_path / "run"
        assert run_cli("quotient", "--system", "annulus", "--seed", "9",
                       "--out", str(out)) == 0
        with open(out / "quotient_dmatrix.csv") as fh:
            rows = list(csv.DictReader(fh))
        n = int(np.sqrt(len(rows)))
        D = np.zeros((n, n))
        for r in rows:
            D[int(r["i"]), int(r["j"])] = float(r["dtilde"])
        assert np.array_equal(D, D.T)
        assert (out / "quotient_classes.csv").exists()
        manifest = read_json(out / "manifest.json")
        assert manifest["results"]["audit"]["triangle_violations"] == 0

    def test_points_csv_input(self, tmp_path):
        pts = tmp_path / "pts.csv"
        pts.write_text("x,y\n1.0,0.0\n-1.25,0.0\n1.5,0.4\n")
        out = tmp_path / "run"
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({
            "system": {"name": "annulus"},
            "params": {"points_csv": str(pts)},
        }))
        assert run_cli("quotient", "--config", str(cfg), "--out", str(out)) == 0
        with open(out / "quotient_dmatrix.csv") as fh:
            rows = list(csv.DictReader(fh))
        d01 = [float(r["dtilde"]) for r in rows
               if r["i"] == "0" and r["j"] == "1"][0]
        assert abs(d01 - 0.25) < 1e-9


class TestDeterminism:
    ENTROPY_CFG = {
        "system": {"name": "doubling_suspension"},
        "seed": 11,
        "params": {"T_list": [2, 3, 4], "eps_list": [0.1],
                   "delta_list": [0.1], "candidate_count": 256},
    }

    def test_entropy_byte_identical_any_workers(self, tmp_path, monkeypatch):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(self.ENTROPY_CFG))
        blobs = []
        # identical resolved config both times: same relative out dir,
        # different cwd, different worker counts
        for workers, sub in ((1, "a"), (4, "b")):
            (tmp_path / sub).mkdir(exist_ok=True)
            monkeypatch.chdir(tmp_path / sub)
            assert run_cli("entropy", "--config", str(cfg), "--out", "out",
                           "--workers", str(workers)) == 0
            out = tmp_path / sub / "out"
            blobs.append({
                "table": (out / "entropy_table.csv").read_bytes(),
                "manifest": (out / "manifest.json").read_bytes(),
            })
        assert blobs[0]["table"] == blobs[1]["table"]
        assert blobs[0]["manifest"] == blobs[1]["manifest"]

    def test_simulate_rerun_identical(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({
            "system": {"name": "annulus"},
            "seed": 5,
            "params": {"horizon": 20.0, "dt_sample": 0.05},
        }))
        out = tmp_path / "out"
        assert run_cli("simulate", "--config", str(cfg), "--out", str(out)) == 0
        first = {p.name: p.read_bytes() for p in out.iterdir()}
        assert run_cli("simulate", "--config", str(cfg), "--out", str(out)) == 0
        second = {p.name: p.read_bytes() for p in out.iterdir()}
        assert first == second
