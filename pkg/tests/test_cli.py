import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ncsde.cli import main
from ncsde.simulate import MixtureDesign, generate_mixture
from ncsde.spectral import read_time_series_csv, write_matrix_csv


@pytest.fixture(scope="module")
def mixture_csv(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    ts, labels = generate_mixture(MixtureDesign(n=256, m=9, seed=3))
    path = root / "mixture.csv"
    write_matrix_csv(path, ts.values, header=[f"s{i}" for i in range(9)])
    return path


class TestPeriodogramCommand:
    def test_round_trip_shape(self, mixture_csv, tmp_path):
        out = tmp_path / "pg.csv"
        assert main(["periodogram", str(mixture_csv), "-o", str(out)]) == 0
        pg = read_time_series_csv(out)
        assert pg.values.shape == (127, 9)
        grid = read_time_series_csv(out.with_suffix(".grid.csv"))
        assert grid.values.shape == (127, 1)
        meta = json.loads((tmp_path / "meta.json").read_text())
        assert meta["command"] == "periodogram" and meta["n_freq"] == 127

    def test_truncate_band(self, mixture_csv, tmp_path):
        out = tmp_path / "pg.csv"
        assert main(["periodogram", str(mixture_csv), "--truncate", "50", "-o", str(out)]) == 0
        assert read_time_series_csv(out).values.shape == (50, 9)

    def test_missing_input_exits_2(self, tmp_path):
        assert main(["periodogram", str(tmp_path / "nope.csv"), "-o", str(tmp_path / "o.csv")]) == 2

    def test_parse_error_exits_2(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n1,zap\n")
        assert main(["periodogram", str(bad), "-o", str(tmp_path / "o.csv")]) == 2


class TestFitCommand:
    def test_auto_lambda_fit_converges(self, mixture_csv, tmp_path):
        out = tmp_path / "fit"
        code = main(["fit", str(mixture_csv), "--K", "3", "--L", "20", "-o", str(out)])
        assert code == 0
        meta = json.loads((out / "meta.json").read_text())
        assert meta["converged"] is True
        theta = read_time_series_csv(out / "theta.csv") if False else None
        a = np.loadtxt(out / "a.csv", delimiter=",")
        assert a.shape == (9, 3)
        sdf = np.loadtxt(out / "sdf.csv", delimiter=",", skiprows=1)
        assert sdf.shape == (127, 9)
        assert np.all(sdf > 0)
        trace = json.loads((out / "trace.json").read_text())
        assert len(trace["objective"]) == len(trace["lambda"])

    def test_lambda_fixed_zero_unpenalized(self, mixture_csv, tmp_path):
        out = tmp_path / "fit0"
        code = main([
            "fit", str(mixture_csv), "--K", "2", "--L", "12",
            "--lambda", "fixed:0", "-o", str(out),
        ])
        assert code in (0, 3)
        meta = json.loads((out / "meta.json").read_text())
        assert meta["lambda"] == 0.0
        trace = json.loads((out / "trace.json").read_text())
        # unpenalized objective path: strictly the deviance, non-increasing
        assert all(b <= a + 1e-9 for a, b in zip(trace["objective"], trace["objective"][1:]))

    def test_invalid_k_exits_2(self, mixture_csv, tmp_path):
        assert main(["fit", str(mixture_csv), "--K", "99", "-o", str(tmp_path / "x")]) == 2

    def test_missing_input_exits_2(self, tmp_path):
        assert main(["fit", str(tmp_path / "nope.csv"), "--K", "2", "-o", str(tmp_path / "x")]) == 2

    def test_config_file_merged_under_flags(self, mixture_csv, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"K": 2, "L": 12, "lambda": "fixed:1.0"}))
        out = tmp_path / "fit-cfg"
        code = main(["fit", str(mixture_csv), "--config", str(cfg), "--K", "3", "-o", str(out)])
        assert code in (0, 3)
        meta = json.loads((out / "meta.json").read_text())
        assert meta["config"]["K"] == 3  # flag wins
        assert meta["config"]["lambda_mode"] == "fixed"  # file fills the rest


class TestClusterCommand:
    def test_scores_auto_k(self, mixture_csv, tmp_path):
        fit_dir = tmp_path / "fit"
        assert main(["fit", str(mixture_csv), "--K", "3", "--L", "20", "-o", str(fit_dir)]) == 0
        out = tmp_path / "cl"
        scores = np.loadtxt(fit_dir / "a.csv", delimiter=",")
        scores_csv = tmp_path / "scores.csv"
        write_matrix_csv(scores_csv, scores, header=["c1", "c2", "c3"])
        assert main(["cluster", str(scores_csv), "--k", "3", "-o", str(out)]) == 0
        labels = np.loadtxt(out / "labels.csv", delimiter=",", skiprows=1)
        assert labels.shape == (9, 2)
        dend = json.loads((out / "dendrogram.json").read_text())
        assert len(dend["merges"]) == 8
        wss = np.loadtxt(out / "wss.csv", delimiter=",", skiprows=1)
        assert wss.shape[1] == 2

    def test_k_one_all_same_label(self, tmp_path):
        pts = tmp_path / "p.csv"
        write_matrix_csv(pts, np.random.default_rng(0).standard_normal((10, 2)),
                         header=["x", "y"])
        out = tmp_path / "cl1"
        assert main(["cluster", str(pts), "--k", "1", "-o", str(out)]) == 0
        labels = np.loadtxt(out / "labels.csv", delimiter=",", skiprows=1)
        assert np.all(labels[:, 1] == 1)

    def test_k_above_m_exits_2(self, tmp_path):
        pts = tmp_path / "p.csv"
        write_matrix_csv(pts, np.random.default_rng(0).standard_normal((10, 2)),
                         header=["x", "y"])
        assert main(["cluster", str(pts), "--k", "11", "-o", str(tmp_path / "x")]) == 2


class TestSimulateCommand:
    def test_minimal_smoke(self, tmp_path):
        out = tmp_path / "report.csv"
        code = main(["simulate", "--cells", "100x6", "--runs", "2", "--seed", "1",
                     "-o", str(out)])
        assert code == 0
        text = out.read_text()
        assert text.splitlines()[0].startswith("n,m,estimator")
        assert len(text.strip().splitlines()) == 7
        assert out.with_suffix(".json").exists()

    def test_seeded_reproducibility_byte_identical(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        for out in (a, b):
            assert main(["simulate", "--cells", "100x6", "--runs", "2", "--seed", "7",
                         "-o", str(out)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestCliContract:
    def test_help_exits_0(self):
        proc = subprocess.run(
            [sys.executable, "-m", "ncsde.cli", "--help"], capture_output=True
        )
        assert proc.returncode == 0

    def test_unknown_flag_exits_2(self):
        proc = subprocess.run(
            [sys.executable, "-m", "ncsde.cli", "simulate", "--bogus"],
            capture_output=True,
        )
        assert proc.returncode == 2

    def test_no_subcommand_exits_2(self):
        assert main([]) == 2
