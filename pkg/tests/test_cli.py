import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from daeflow.cli import SWISSROLL_FILES, _fmt, main

GMM = "0.5:-2:0.5 ; 0.5:2:0.5"


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def final_points(data):
    t_end = data[:, 0].max()
    return data[data[:, 0] == t_end][:, 2:]


class TestExitCodes:
    def test_unknown_flag(self, capsys):
        assert main(["orbit", "--bogus"]) == 1
        assert capsys.readouterr().err.startswith("error[config]:")

    def test_no_command(self, capsys):
        assert main([]) == 1
        assert "error[config]:" in capsys.readouterr().err

    def test_bad_value(self, tmp_path, capsys):
        assert main(["orbit", "--tau", "zero", "--out", str(tmp_path / "o.csv")]) == 1
        err = capsys.readouterr().err
        assert err.startswith("error[config]: tau")
        assert err.count("\n") == 1
        assert not (tmp_path / "o.csv").exists()

    def test_collapse_is_numerical(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "mean = 0, 0\ncov = 2, 0, 0, 1\n")
        assert main(["orbit", "--config", cfg, "--t-max", "0.5", "--out", str(tmp_path / "o.csv")]) == 2
        assert capsys.readouterr().err.startswith("error[numerical]:")

    def test_console_script(self, tmp_path):
        out = tmp_path / "e.csv"
        proc = subprocess.run([sys.executable, "-m", "daeflow.cli", "entropy", "--out", str(out)], capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stdout.strip() == str(out)


class TestOrbit:
    def test_singularity_approach(self, tmp_path):
        cfg = write_cfg(tmp_path, "mean = 0, 0\ncov = 2, 0, 0, 1\nmode = continuous\n")
        out = tmp_path / "orbit.csv"
        assert main(["orbit", "--config", cfg, "--t-max", "0.49", "--out", str(out)]) == 0
        header, data = read_csv(out)
        assert header == ["t", "particle_id", "x1", "x2"]
        assert data[:, 0].max() == 0.49
        assert np.var(final_points(data)[:, 1]) < 0.05
        meta = json.loads((tmp_path / "orbit.json").read_text())
        assert meta["n_grid"] == 25 and meta["mode"] == "continuous"

    def test_tau_contrast(self, tmp_path):
        cfg = write_cfg(tmp_path, f"dist = gmm\ncomponents = {GMM}\nmode = composed\nt_max = 1\n")
        ends = []
        for tau in ("0.5", "0.05"):
            out = tmp_path / f"orbit_{tau}.csv"
            assert main(["orbit", "--config", cfg, "--tau", tau, "--out", str(out)]) == 0
            ends.append(final_points(read_csv(out)[1]))
        assert np.abs(ends[0] - ends[1]).max() > 0.05

    @pytest.mark.parametrize("mode", ["continuous", "ordinary", "composed"])
    def test_zero_time_identity(self, tmp_path, mode):
        cfg = write_cfg(tmp_path, f"dist = gmm\ncomponents = {GMM}\nn_samples = 7\ngrid_n = 3\n")
        out = tmp_path / "orbit.csv"
        assert main(["orbit", "--config", cfg, "--mode", mode, "--t-max", "0", "--out", str(out), "--seed", "4"]) == 0
        _, data = read_csv(out)
        assert data.shape == (10, 3)
        assert np.all(data[:, 0] == 0)
        np.testing.assert_array_equal(data[:, 1], np.arange(10))
        np.testing.assert_allclose(data[:3, 2], [-2, 0, 2])

    def test_byte_identical(self, tmp_path):
        cfg = write_cfg(tmp_path, f"dist = gmm\ncomponents = {GMM}\nmode = composed\nt_max = 0.4\nn_particles = 300\n")
        blobs = []
        for k in range(2):
            out = tmp_path / f"o{k}.csv"
            assert main(["orbit", "--config", cfg, "--seed", "9", "--out", str(out)]) == 0
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]

    def test_seventeen_digits_round_trip(self, tmp_path):
        out = tmp_path / "orbit.csv"
        assert main(["orbit", "--mode", "ordinary", "--out", str(out)]) == 0
        text = out.read_text().splitlines()[1:]
        for line in text[:50]:
            for field in line.split(",")[2:]:
                assert _fmt(float(field)) == field
        assert _fmt(0.1) == "0.10000000000000001"
        assert _fmt(3) == "3"


class TestTables:
    def test_variance_decay(self, tmp_path):
        out = tmp_path / "v.csv"
        assert main(["variance-decay", "--out", str(out)]) == 0
        header, data = read_csv(out)
        assert header == ["t", "continuous", "ordinary", "composed_tau=0.2", "composed_tau=0.1", "composed_tau=0.05"]
        cols = dict(zip(header, data.T))
        i_half = np.flatnonzero(np.isclose(cols["t"], 0.5))[0]
        assert cols["continuous"][i_half] == pytest.approx(0.0, abs=1e-15)
        assert cols["ordinary"][-1] == pytest.approx(0.25, rel=1e-15)
        assert np.all(cols["composed_tau=0.2"] >= cols["composed_tau=0.1"])
        assert np.all(cols["composed_tau=0.1"] >= cols["composed_tau=0.05"])

    def test_variance_decay_trained(self, tmp_path):
        out = tmp_path / "v.csv"
        assert main(["variance-decay", "--train", "--t-max", "0.6", "--dt", "0.1", "--out", str(out)]) == 0
        header, data = read_csv(out)
        cols = dict(zip(header, data.T))
        assert "trained_ordinary" in cols and "trained_composed_tau=0.2" in cols
        assert cols["trained_ordinary"][-1] < cols["trained_ordinary"][0]

    def test_entropy(self, tmp_path):
        out = tmp_path / "e.csv"
        assert main(["entropy", "--out", str(out)]) == 0
        header, data = read_csv(out)
        assert header == ["t", "entropy_continuous", "entropy_ordinary"]
        cols = dict(zip(header, data.T))
        assert np.all(np.diff(cols["entropy_continuous"]) < 0)
        i = np.flatnonzero(np.isclose(cols["t"], 0.25))[0]
        assert cols["entropy_continuous"][i] - cols["entropy_continuous"][0] == pytest.approx(-0.34657, abs=1e-5)
        assert np.all(cols["entropy_ordinary"][1:] >= cols["entropy_continuous"][1:])

    def test_ridgelet_zero(self, tmp_path):
        out = tmp_path / "r.json"
        assert main(["ridgelet", "--config", write_cfg(tmp_path, "target = zero\n"), "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["single_layer_error"] == 0.0
        assert doc["stacked_error"] == 0.0
        assert doc["K"] > 0


class TestSwissRoll:
    def test_outputs_row_aligned(self, tmp_path):
        cfg = write_cfg(tmp_path, "n = 150\nJ0 = 8\nJ1 = 6\nepochs = 200\n")
        out = tmp_path / "sr"
        assert main(["swissroll", "--config", cfg, "--out", str(out)]) == 0
        for name in SWISSROLL_FILES:
            header, data = read_csv(out / f"{name}.csv")
            assert header == ["point_id", "x1", "x2"]
            assert data.shape == (150, 3)
            np.testing.assert_array_equal(data[:, 0], np.arange(150))
        summary = json.loads((out / "summary.json").read_text())
        assert -1.0 <= summary["displacement_cosine"] <= 1.0
        assert set(summary["losses"]) == {"stack_layer0", "stack_layer1", "composed_step0", "composed_step1"}

    def test_deterministic(self, tmp_path):
        cfg = write_cfg(tmp_path, "n = 100\nJ0 = 6\nJ1 = 4\nepochs = 100\n")
        blobs = []
        for k in range(2):
            out = tmp_path / f"sr{k}"
            assert main(["swissroll", "--config", cfg, "--seed", "3", "--out", str(out)]) == 0
            blobs.append([(out / f"{n}.csv").read_bytes() for n in SWISSROLL_FILES] + [(out / "summary.json").read_bytes()])
        assert blobs[0] == blobs[1]
