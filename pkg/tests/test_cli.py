import csv
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from opcalc.cli import (
    COMPARE_COLUMNS,
    DATASET_COLUMNS,
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VERIFY,
    RECON_COLUMNS,
    main,
    write_atomic,
)
from opcalc.config import ModelConfig
from opcalc.field import Field
from opcalc.selfcal import make_mock_data, minimize_gibbs

SUMMARY_KEYS = {
    "config",
    "truth_response",
    "gibbs_response",
    "gibbs_sigma",
    "map_response",
    "map_sigma",
    "iterations",
    "converged",
    "final_grad_norm",
    "wall_time",
}


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def write_config(path, **raw):
    path.write_text(json.dumps(raw))
    return str(path)


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--seed", "1", "--out", str(out)]) == EXIT_OK
    return out


@pytest.fixture(scope="module")
def inferred(simulated, tmp_path_factory):
    out = tmp_path_factory.mktemp("inf")
    assert main(["infer", "--data", str(simulated / "dataset.csv"), "--out", str(out)]) == EXIT_OK
    return out


class TestSimulate:
    def test_schema(self, simulated):
        header, table = read_csv(simulated / "dataset.csv")
        assert header == DATASET_COLUMNS
        assert table.shape == (128, 5)
        truth = json.loads((simulated / "truth.json").read_text())
        assert set(truth) == {"truth_r", "truth_response", "seed"}
        assert truth["seed"] == 1
        assert truth["truth_response"] == truth["truth_r"] + 3.0

    def test_values_round_trip(self, simulated):
        _, table = read_csv(simulated / "dataset.csv")
        data = make_mock_data(ModelConfig(), 1)
        assert np.array_equal(table[:, 2], data.d.values)
        assert np.array_equal(table[:, 3], data.truth_a.values)
        assert np.array_equal(table[:, 4], data.signal_response.values)

    def test_byte_identical(self, simulated, tmp_path):
        assert main(["simulate", "--seed", "1", "--out", str(tmp_path)]) == EXIT_OK
        assert (tmp_path / "dataset.csv").read_bytes() == (simulated / "dataset.csv").read_bytes()
        assert (tmp_path / "truth.json").read_bytes() == (simulated / "truth.json").read_bytes()

    def test_seed_defaults_to_config(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", grid=16, seed=7)
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
        assert json.loads((tmp_path / "o" / "truth.json").read_text())["seed"] == 7

    def test_noise_free(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", noise_sigma=1e-12)
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
        _, table = read_csv(tmp_path / "dataset.csv")
        assert np.max(np.abs(table[:, 2] / table[:, 4] - 1)) < 1e-9


class TestInfer:
    def test_outputs(self, inferred):
        header, table = read_csv(inferred / "reconstruction.csv")
        assert header == RECON_COLUMNS
        assert table.shape == (128, 6)
        assert np.array_equal(table[:, 0], np.arange(128))
        summary = json.loads((inferred / "summary.json").read_text())
        assert set(summary) == SUMMARY_KEYS
        assert summary["converged"] is True
        assert summary["config"] == ModelConfig().to_dict()
        assert all(np.isfinite(v) for k, v in summary.items() if isinstance(v, float))

    def test_summary_matches_library(self, simulated, inferred):
        cfg = ModelConfig()
        _, table = read_csv(simulated / "dataset.csv")
        res = minimize_gibbs(Field(cfg.grid, table[:, 2]), cfg)
        summary = json.loads((inferred / "summary.json").read_text())
        assert summary["gibbs_sigma"] == np.sqrt(res.state.D_rr)
        assert summary["gibbs_response"] == res.state.m_r + cfg.r0
        assert summary["map_response"] == res.map_r + cfg.r0
        assert summary["truth_response"] == json.loads((simulated / "truth.json").read_text())["truth_response"]
        _, recon = read_csv(inferred / "reconstruction.csv")
        assert np.array_equal(recon[:, 2], res.state.m_a.values)
        assert np.array_equal(recon[:, 3], np.sqrt(np.diag(res.state.D_aa)))

    def test_figures_are_svg(self, inferred):
        for name in ("fig1.svg", "fig2.svg"):
            root = ET.parse(inferred / name).getroot()
            assert root.tag.endswith("svg")
            assert root.findall(".//{http://www.w3.org/2000/svg}polyline")
        assert ET.parse(inferred / "fig2.svg").getroot().findall(".//{http://www.w3.org/2000/svg}polygon")

    def test_no_plots(self, simulated, inferred, tmp_path):
        assert main(["infer", "--data", str(simulated / "dataset.csv"), "--out", str(tmp_path), "--no-plots"]) == EXIT_OK
        assert not list(tmp_path.glob("*.svg"))
        assert (tmp_path / "reconstruction.csv").read_bytes() == (inferred / "reconstruction.csv").read_bytes()

    def test_non_convergence_exit_code(self, simulated, tmp_path):
        cfg = write_config(tmp_path / "c.json", newton={"max_iter": 1})
        code = main(["infer", "--config", cfg, "--data", str(simulated / "dataset.csv"), "--out", str(tmp_path / "o")])
        assert code == EXIT_NOT_CONVERGED
        assert json.loads((tmp_path / "o" / "summary.json").read_text())["converged"] is False

    def test_bad_dataset(self, tmp_path):
        bad = tmp_path / "dataset.csv"
        bad.write_text("a,b\n1,2\n")
        assert main(["infer", "--data", str(bad), "--out", str(tmp_path / "o")]) == EXIT_USAGE
        assert main(["infer", "--data", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "o")]) == EXIT_USAGE

    def test_dataset_grid_mismatch(self, simulated, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", grid=32)
        code = main(["infer", "--config", cfg, "--data", str(simulated / "dataset.csv"), "--out", str(tmp_path)])
        assert code == EXIT_USAGE
        assert "32 pixels" in capsys.readouterr().err


class TestCompare:
    def test_single_seed(self, tmp_path):
        assert main(["compare", "--n-seeds", "1", "--out", str(tmp_path)]) == EXIT_OK
        header, table = read_csv(tmp_path / "compare.csv")
        assert header == COMPARE_COLUMNS
        assert table.shape == (1, 8)

    def test_z_columns_and_aggregates(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", grid=32)
        assert main(["compare", "--config", cfg, "--n-seeds", "4", "--out", str(tmp_path)]) == EXIT_OK
        _, t = read_csv(tmp_path / "compare.csv")
        assert t[:, 0].tolist() == [1, 2, 3, 4]
        assert np.allclose(t[:, 6], (t[:, 2] - t[:, 1]) / t[:, 3], rtol=1e-12, atol=0)
        assert np.allclose(t[:, 7], (t[:, 4] - t[:, 1]) / t[:, 5], rtol=1e-12, atol=0)
        stats = json.loads((tmp_path / "compare_summary.json").read_text())
        assert stats["n_seeds"] == stats["n_ok"] == 4
        assert stats["gibbs"]["mean_abs_z"] == pytest.approx(np.abs(t[:, 6]).mean(), rel=1e-12)
        for name in ("gibbs", "map"):
            cov = [stats[name][f"coverage_{k}sigma"] for k in (1, 2, 3)]
            assert cov == sorted(cov) and 0 <= cov[0] and cov[2] <= 1

    def test_failed_seed_recorded(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", grid=16, newton={"max_iter": 1})
        assert main(["compare", "--config", cfg, "--n-seeds", "2", "--out", str(tmp_path)]) == EXIT_NOT_CONVERGED
        _, t = read_csv(tmp_path / "compare.csv")
        assert t.shape == (2, 8)
        stats = json.loads((tmp_path / "compare_summary.json").read_text())
        assert set(stats["failures"]) == {"1", "2"}

    def test_rejects_zero_seeds(self, tmp_path):
        assert main(["compare", "--n-seeds", "0", "--out", str(tmp_path)]) == EXIT_USAGE


class TestUsage:
    def test_help(self):
        assert main(["--help"]) == EXIT_OK

    @pytest.mark.parametrize(
        "argv",
        [[], ["bogus"], ["simulate"], ["verify", "--level", "medium"], ["compare", "--n-seeds", "x", "--out", "o"]],
    )
    def test_usage_errors(self, argv):
        assert main(argv) == EXIT_USAGE

    def test_config_error_diagnostics(self, tmp_path, capsys):
        bad = tmp_path / "c.json"
        bad.write_text('{"noise_sigma": -1}')
        assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_USAGE
        assert "noise_sigma" in capsys.readouterr().err
        bad.write_text('{"r0": 1,\n "seed": }')
        assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_USAGE
        assert "line 2" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == EXIT_USAGE


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "x.txt"
    write_atomic(target, "one\n")
    write_atomic(target, "two\n")
    assert target.read_text() == "two\n"
    assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]


def test_verify_negative_control(capsys):
    assert main(["verify", "--level", "fast", "--inject-fault", "gradient"]) == EXIT_VERIFY
    out = capsys.readouterr().out
    assert "FAIL  selfcal gradient/Hessian vs FD" in out
