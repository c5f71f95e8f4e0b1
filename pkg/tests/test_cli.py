import json

import numpy as np
import pytest

import satkerr.selftest as selftest
import satkerr.solver as solver
from satkerr.cli import main
from satkerr.dataset import (Dataset, DatasetManifest, OBSERVATION_BYTES,
                             ParameterRanges)
from satkerr.imaging import NoiseConfig
from satkerr.regression import write_predictions_csv
from satkerr.solver import PropagationConfig, TransverseGrid


@pytest.fixture(scope="module")
def cheap_config(tmp_path_factory):
    manifest = DatasetManifest(
        ranges=ParameterRanges(n2_count=2, isat_count=2, alpha_count=2),
        grid=TransverseGrid(224, 224, 12 * 1.7e-3, 12 * 1.7e-3),
        downsample=1,
        propagation=PropagationConfig(0.20, 4),
        noise=NoiseConfig.disabled(),
        master_seed=11,
    )
    path = tmp_path_factory.mktemp("config") / "config.json"
    manifest.save(path)
    return path


@pytest.fixture(scope="module")
def generated(cheap_config, tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "ds"
    code = main(["generate", "--config", str(cheap_config), "--out", str(out)])
    assert code == 0
    return out


class TestGenerate:
    def test_creates_exact_file_sizes(self, generated, capsys):
        assert (generated / "manifest.json").exists()
        assert (generated / "observations.f32").stat().st_size == 8 * 2 * 224 * 224 * 4
        assert (generated / "labels.f64").stat().st_size == 8 * 3 * 8

    def test_summary_is_machine_readable(self, cheap_config, tmp_path, capsys):
        out = tmp_path / "ds"
        assert main(["generate", "--config", str(cheap_config),
                     "--out", str(out)]) == 0
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert summary["command"] == "generate"
        assert summary["samples"] == 8

    def test_bad_config_exits_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{\"format_version\": \"nlse-ds/1\"}")
        assert main(["generate", "--config", str(bad),
                     "--out", str(tmp_path / "x")]) == 1
        assert "error" in capsys.readouterr().err

    def test_missing_config_exits_1(self, tmp_path):
        assert main(["generate", "--config", str(tmp_path / "none.json"),
                     "--out", str(tmp_path / "x")]) == 1

    def test_unwritable_out_exits_3_without_manifest(self, cheap_config, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("a file, not a directory")
        out = blocker / "nested" / "ds"
        assert main(["generate", "--config", str(cheap_config),
                     "--out", str(out)]) == 3
        assert not out.exists()

    def test_seed_override_changes_noise(self, tmp_path, capsys):
        manifest = DatasetManifest(
            ranges=ParameterRanges(n2_count=2, isat_count=2, alpha_count=2),
            grid=TransverseGrid(224, 224, 12 * 1.7e-3, 12 * 1.7e-3),
            downsample=1,
            propagation=PropagationConfig(0.20, 2),
            noise=NoiseConfig(),
            master_seed=1,
        )
        cfg = tmp_path / "cfg.json"
        manifest.save(cfg)
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["generate", "--config", str(cfg), "--out", str(a)]) == 0
        assert main(["generate", "--config", str(cfg), "--out", str(b),
                     "--seed", "2"]) == 0
        assert ((a / "observations.f32").read_bytes()
                != (b / "observations.f32").read_bytes())
        assert DatasetManifest.load(b / "manifest.json").master_seed == 2


class TestSplit:
    def test_writes_split_lists(self, generated, capsys):
        assert main(["split", "--dataset", str(generated),
                     "--fractions", "0.5,0.25,0.25", "--seed", "3"]) == 0
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert summary["sizes"] == {"train": 4, "validation": 2, "test": 2}
        manifest = DatasetManifest.load(generated / "manifest.json")
        assert manifest.splits["seed"] == 3

    def test_bad_fractions_exit_1(self, generated):
        assert main(["split", "--dataset", str(generated),
                     "--fractions", "0.5,0.2", "--seed", "0"]) == 1
        assert main(["split", "--dataset", str(generated),
                     "--fractions", "a,b,c", "--seed", "0"]) == 1


class TestOracle:
    def test_fit_json_output(self, generated, capsys):
        assert main(["oracle", "--dataset", str(generated), "--index", "3",
                     "--method", "grid", "--budget", "27"]) == 0
        payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert payload["command"] == "oracle"
        assert payload["evaluations"] <= 27
        assert len(payload["best"]) == 3
        # 2x2x2 grid labels sit on corners, which the coarse stage probes
        truth = Dataset(generated).labels_normalized()[3]
        assert np.max(np.abs(np.array(payload["best"]) - truth)) <= 0.02

    def test_bad_index_exits_1(self, generated):
        assert main(["oracle", "--dataset", str(generated), "--index", "99",
                     "--budget", "27"]) == 1


class TestEval:
    def write_perfect_csv(self, dataset_dir, path, jitter=0.0, rng=None):
        data = Dataset(dataset_dir)
        truths = data.labels_normalized()
        preds = truths.copy()
        if jitter:
            preds = preds + rng.normal(0, jitter, preds.shape)
        write_predictions_csv(path, np.arange(len(data)), preds, truths)
        return truths

    def test_perfect_predictions(self, generated, tmp_path, capsys):
        csv_path = tmp_path / "pred.csv"
        out_path = tmp_path / "metrics.json"
        self.write_perfect_csv(generated, csv_path)
        assert main(["eval", "--pred", str(csv_path), "--dataset",
                     str(generated), "--out", str(out_path)]) == 0
        report = json.loads(out_path.read_text())
        assert report["aggregate_mae_percent"] == 0.0
        for name in ("n2", "isat", "alpha"):
            assert report["per_parameter"][name]["mae_percent"] == 0.0
            assert report["per_parameter"][name]["r2"] == 1.0

    def test_row_order_invariant(self, generated, tmp_path, capsys):
        rng = np.random.default_rng(0)
        csv_a = tmp_path / "a.csv"
        data = Dataset(generated)
        truths = data.labels_normalized()
        preds = truths + rng.normal(0, 0.05, truths.shape)
        write_predictions_csv(csv_a, np.arange(len(data)), preds, truths)
        shuffled = rng.permutation(len(data))
        csv_b = tmp_path / "b.csv"
        write_predictions_csv(csv_b, shuffled, preds[shuffled], truths[shuffled])
        out_a, out_b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["eval", "--pred", str(csv_a), "--dataset", str(generated),
                     "--out", str(out_a)]) == 0
        assert main(["eval", "--pred", str(csv_b), "--dataset", str(generated),
                     "--out", str(out_b)]) == 0
        assert json.loads(out_a.read_text()) == json.loads(out_b.read_text())

    def test_truth_mismatch_rejected(self, generated, tmp_path, capsys):
        data = Dataset(generated)
        truths = data.labels_normalized().copy()
        truths[0, 0] += 1e-3  # stale or mismatched split
        csv_path = tmp_path / "bad.csv"
        write_predictions_csv(csv_path, np.arange(len(data)), truths, truths)
        assert main(["eval", "--pred", str(csv_path), "--dataset",
                     str(generated), "--out", str(tmp_path / "m.json")]) == 1
        assert "disagree" in capsys.readouterr().err

    def test_malformed_csv_exits_1(self, generated, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("not,a,valid,header\n")
        assert main(["eval", "--pred", str(bad), "--dataset", str(generated),
                     "--out", str(tmp_path / "m.json")]) == 1

    def test_plots_are_svg(self, generated, tmp_path, capsys):
        csv_path = tmp_path / "pred.csv"
        self.write_perfect_csv(generated, csv_path)
        plot_dir = tmp_path / "plots"
        assert main(["eval", "--pred", str(csv_path), "--dataset",
                     str(generated), "--out", str(tmp_path / "m.json"),
                     "--plot", str(plot_dir)]) == 0
        for name in ("n2", "isat", "alpha"):
            svg = (plot_dir / f"{name}.svg").read_text()
            assert svg.lstrip().startswith("<?xml")
            assert svg.count("<path") > 8  # scatter + line + trend markers


class TestSelftest:
    def test_all_pass_on_cheap_subset(self, capsys, monkeypatch):
        monkeypatch.setattr(selftest, "ALL_CHECKS",
                            (selftest.check_nll_values,
                             selftest.check_diffraction))
        assert main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert out.count("[PASS]") == 2
        summary = json.loads(out.strip().splitlines()[-1])
        assert summary["failed"] == []

    def test_missigned_kinetic_phase_fails_diffraction(self, capsys, monkeypatch):
        true_step = solver.step_linear

        def flipped(field, beam, dz):
            return true_step(field, beam, -dz)

        monkeypatch.setattr(solver, "step_linear", flipped)
        result = selftest.check_diffraction()
        assert not result.passed

    def test_single_resolution_fails_strang_check(self):
        result = selftest.check_strang_order(n_steps_list=(200,))
        assert not result.passed

    def test_failing_check_exits_nonzero(self, capsys, monkeypatch):
        def broken():
            return selftest.CheckResult("broken", False, "synthetic failure")

        monkeypatch.setattr(selftest, "ALL_CHECKS", (broken,))
        assert main(["selftest"]) == 1
        out = capsys.readouterr().out
        assert "[FAIL] broken" in out
