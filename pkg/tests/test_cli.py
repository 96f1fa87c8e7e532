import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from dmdclust import io
from dmdclust.cli import main
from dmdclust.signal_model import DampedSinusoidModel, synthesize


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def complex_values(path):
    return np.array([complex(float(r["re"]), float(r["im"])) for r in read_rows(path)])


@pytest.fixture(scope="module")
def toy_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("toy")
    assert main(["toy", "--out", str(out)]) == 0
    return out


class TestToy:
    def test_spectrum_drop(self, toy_run):
        s = np.array([float(r["sigma"]) for r in read_rows(toy_run / "singular_values.csv")])
        assert s[7] / s[8] > 5

    def test_eigenvalues(self, toy_run):
        lam = complex_values(toy_run / "eigenvalues.csv")
        assert lam.size == 8
        truth = np.exp(1j * np.array([s * w for w in (0.8, 1.0, 1.5, 1.7) for s in (1, -1)]))
        assert np.abs(lam[:, None] - truth[None, :]).min(axis=1).max() < 0.05

    def test_outputs_and_config(self, toy_run):
        for name in ("ensemble.csv", "features.csv", "ground_truth.csv", "feature_model.json",
                     "dendrogram.csv", "labels.csv"):
            assert (toy_run / name).exists()
        cfg = json.loads((toy_run / "config.json").read_text())
        assert cfg["command"] == "toy" and cfg["d"] == 19 and cfg["k"] == 3
        assert cfg["truncation"] == {"kind": "gap", "value": 1e-12}
        assert len(read_rows(toy_run / "features.csv")) == 23 * 8

    def test_noise_free_labels_exact(self, tmp_path):
        assert main(["toy", "--sigma", "0", "--out", str(tmp_path)]) == 0
        got = [r["label"] for r in read_rows(tmp_path / "labels.csv")]
        truth = [r["label"] for r in read_rows(tmp_path / "ground_truth.csv")]
        assert got == truth

    def test_byte_identical_reruns(self, tmp_path, toy_run):
        assert main(["toy", "--out", str(tmp_path)]) == 0
        # config.json echoes the output directory, everything else must match
        for f in toy_run.iterdir():
            if f.name == "config.json":
                continue
            assert (tmp_path / f.name).read_bytes() == f.read_bytes(), f.name


def series_csv(tmp_path, values, name="s.csv"):
    p = tmp_path / name
    io.write_ensemble_csv(p, np.asarray(values, dtype=complex)[None, :, None], ["s"])
    return p


class TestSingleSeries:
    def test_decay(self, tmp_path):
        p = series_csv(tmp_path, 0.9 ** np.arange(12))
        assert main(["dmd", str(p), "--d", "3", "--out", str(tmp_path)]) == 0
        res = json.loads((tmp_path / "dmd.json").read_text())
        assert res["rank"] == 1
        assert abs(complex(res["eigenvalues"][0]["re"], res["eigenvalues"][0]["im"]) - 0.9) < 1e-8
        assert res["reconstruction_error"] < 1e-8

    def test_constant(self, tmp_path):
        p = series_csv(tmp_path, np.full(10, 2.5))
        assert main(["dmd", str(p), "--d", "2", "--out", str(tmp_path)]) == 0
        res = json.loads((tmp_path / "dmd.json").read_text())
        lam = res["eigenvalues"][0]
        assert abs(lam["re"] - 1) < 1e-12 and abs(lam["im"]) < 1e-12
        coeff = res["coefficients"][0][0]
        assert abs(coeff["re"] - 2.5) < 1e-10

    def test_verify_pencil(self, tmp_path):
        m = DampedSinusoidModel([1.0, 0.5j, 2.0], np.exp([0.4j, 1.1j, -0.7j]) * 0.97)
        p = series_csv(tmp_path, synthesize(m, 20)[:, 0])
        assert main(["dmd", str(p), "--d", "5", "--verify-pencil", "--dump-matrices",
                     "--out", str(tmp_path)]) == 0
        res = json.loads((tmp_path / "dmd.json").read_text())
        assert res["rank"] == 3
        assert res["similarity_residual"] < 1e-10
        assert res["adjoint_match_residual"] < 1e-8
        X = io.read_matrix_csv(tmp_path / "X.csv")
        K = io.read_matrix_csv(tmp_path / "K.csv")
        assert X.shape == (6, 14) and K.shape == (3, 3)

    def test_pencil_command(self, tmp_path):
        p = series_csv(tmp_path, 0.7 ** np.arange(8))
        assert main(["pencil", str(p), "--d", "2", "--verify", "--dump-matrices",
                     "--out", str(tmp_path)]) == 0
        res = json.loads((tmp_path / "pencil.json").read_text())
        assert abs(res["eigenvalues"][0]["re"] - 0.7) < 1e-10
        assert (tmp_path / "L.csv").exists()

    def test_series_selection(self, tmp_path):
        p = tmp_path / "two.csv"
        data = np.stack([0.5 ** np.arange(6), 0.8 ** np.arange(6)])[:, :, None]
        io.write_ensemble_csv(p, data, ["a", "b"])
        assert main(["dmd", str(p), "--d", "1", "--series", "b", "--out", str(tmp_path)]) == 0
        res = json.loads((tmp_path / "dmd.json").read_text())
        assert abs(res["eigenvalues"][0]["re"] - 0.8) < 1e-10
        assert main(["dmd", str(p), "--d", "1", "--series", "c", "--out", str(tmp_path)]) == 2


class TestFeatures:
    def test_fit_then_embed(self, tmp_path, toy_run):
        fit_dir, emb_dir = tmp_path / "fit", tmp_path / "emb"
        src = toy_run / "ensemble.csv"
        assert main(["features", str(src), "--d", "19", "--rank", "8", "--k", "3",
                     "--dump-matrices", "--out", str(fit_dir)]) == 0
        assert io.read_matrix_csv(fit_dir / "Q.csv").shape == (8, 23)
        assert main(["features", str(src), "--model", str(fit_dir / "feature_model.json"),
                     "--out", str(emb_dir)]) == 0
        a = np.array([float(r["value"]) for r in read_rows(fit_dir / "features.csv")])
        b = np.array([float(r["value"]) for r in read_rows(emb_dir / "features.csv")])
        np.testing.assert_allclose(a, b, atol=1e-10)

    def test_bad_model_file(self, tmp_path, toy_run):
        bad = tmp_path / "m.json"
        bad.write_text('{"rank": 1}')
        assert main(["features", str(toy_run / "ensemble.csv"), "--model", str(bad),
                     "--out", str(tmp_path)]) == 2


class TestImages:
    def test_lattice_pipeline(self, tmp_path):
        assert main(["synth-lattice", "--layout", "row-pair", "--width", "90", "--height", "90",
                     "--out", str(tmp_path)]) == 0
        meta = json.loads((tmp_path / "regions.json").read_text())
        assert meta["model_rank"] == 13 and len(meta["regions"]) == 2
        out = tmp_path / "seg"
        assert main(["cluster-image", str(tmp_path / "image.pgm"), "--d", "20",
                     "--rank", str(meta["model_rank"]), "--k", "2",
                     "--frequency", str(2 / 28.5), "--out", str(out)]) == 0
        lmap = read_rows(out / "label_map.csv")
        assert len(lmap) == 90 * 90
        truth = {(r["i"], r["j"]): r["label"] for r in read_rows(tmp_path / "regions.csv")}
        pairs = [(truth[(r["i"], r["j"])], r["label"]) for r in lmap if r["label"] != "0"]
        agree = np.mean([t == l for t, l in pairs])
        assert max(agree, 1 - agree) > 0.9
        chosen = [int(r["eigen_index"]) for r in read_rows(out / "mode_maps.csv")]
        for j in chosen:
            assert (out / f"mode_{j:02d}_x.pgm").exists()
            assert (out / f"mode_{j:02d}_y.pgm").exists()
        cfg = json.loads((out / "config.json").read_text())
        assert cfg["truncation"] == {"kind": "fixed_rank", "value": 13}

    def test_single_cluster(self, tmp_path):
        assert main(["synth-lattice", "--width", "60", "--height", "60",
                     "--out", str(tmp_path)]) == 0
        assert main(["cluster-image", str(tmp_path / "image.pgm"), "--d", "10", "--k", "1",
                     "--out", str(tmp_path)]) == 0
        labels = {r["label"] for r in read_rows(tmp_path / "label_map.csv")}
        assert labels == {"0", "1"}

    def test_odd_window_rejected(self, tmp_path):
        assert main(["synth-lattice", "--width", "40", "--height", "40",
                     "--out", str(tmp_path)]) == 0
        assert main(["cluster-image", str(tmp_path / "image.pgm"), "--d", "9",
                     "--out", str(tmp_path)]) == 2


class TestExitCodes:
    def test_missing_file(self, tmp_path):
        assert main(["dmd", str(tmp_path / "nope.csv"), "--d", "1",
                     "--out", str(tmp_path)]) == 2

    def test_malformed_csv(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("series_id,t,dim,re,im\na,0,0,1,0\na,1,0,oops,0\n")
        assert main(["dmd", str(p), "--d", "1", "--out", str(tmp_path)]) == 2
        assert "row 3" in capsys.readouterr().err

    def test_numerical_failures(self, tmp_path):
        p = series_csv(tmp_path, 0.9 ** np.arange(8))
        assert main(["dmd", str(p), "--d", "2", "--rank", "3", "--out", str(tmp_path)]) == 3
        z = series_csv(tmp_path, np.zeros(8), "z.csv")
        assert main(["dmd", str(z), "--d", "2", "--out", str(tmp_path)]) == 3

    @pytest.mark.parametrize("argv", [
        ["toy", "--k", "0"],
        ["toy", "--d", "0"],
        ["toy", "--sigma", "-1"],
        ["toy", "--energy", "1.5"],
        ["toy", "--gap", "0"],
    ])
    def test_invalid_values(self, tmp_path, argv):
        assert main(argv + ["--out", str(tmp_path)]) == 2

    def test_usage_errors(self, tmp_path):
        for argv in (["toy", "--rank", "3", "--gap"], ["nonsense"], []):
            with pytest.raises(SystemExit) as exc:
                main(argv)
            assert exc.value.code == 2


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "dmdclust", "toy", "--sigma", "0",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "labels.csv").exists()
