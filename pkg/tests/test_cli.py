import json

import numpy as np
import pytest

from specattn.cli import main
from specattn.data import gen_synthetic, save_ucr
from specattn.model import ModelConfig, build_ssam_cnn, save_checkpoint


def run_cli(*argv, capsys=None):
    code = main(list(argv))
    out = err = ""
    if capsys is not None:
        captured = capsys.readouterr()
        out, err = captured.out, captured.err
    return code, out, err


@pytest.fixture
def small_data(tmp_path):
    """A small but learnable synthetic file so CLI runs stay fast."""
    ds = gen_synthetic(n_per_class=40, length=30, sigma=1.0,
                       freqs=((1, 3), (1, 6), (1, 12)), seed=11)
    path = tmp_path / "small.csv"
    save_ucr(ds, path)
    return path


class TestSynth:
    def test_default_shape(self, tmp_path, capsys):
        out_path = tmp_path / "synthetic.csv"
        code, out, _ = run_cli("synth", "--out", str(out_path), capsys=capsys)
        assert code == 0
        lines = out_path.read_text().strip().splitlines()
        assert len(lines) == 6000
        assert all(len(line.split(",")) == 101 for line in lines[:10])
        assert json.loads(out)["instances"] == 6000

    def test_literal_preset_aliased_classes_identical(self, tmp_path, capsys):
        out_path = tmp_path / "aliased.csv"
        code, _, _ = run_cli("synth", "--out", str(out_path), "--sigma", "0",
                             "--n-per-class", "2", "--freqs", "paper", capsys=capsys)
        assert code == 0
        lines = out_path.read_text().strip().splitlines()
        row = lambda i: [float(v) for v in lines[i].split(",")[1:]]
        np.testing.assert_allclose(row(2), row(4), atol=1e-9)  # class 2 row == class 3 row

    def test_byte_identical_across_runs(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli("synth", "--out", str(a), "--n-per-class", "5", "--seed", "3", capsys=capsys)
        run_cli("synth", "--out", str(b), "--n-per-class", "5", "--seed", "3", capsys=capsys)
        assert a.read_bytes() == b.read_bytes()

    def test_unwritable_path_fails_with_one_line_error(self, tmp_path, capsys):
        code, _, err = run_cli("synth", "--out", str(tmp_path / "nodir" / "x.csv"),
                               "--n-per-class", "1", capsys=capsys)
        assert code != 0
        assert len(err.strip().splitlines()) == 1
        assert "error" in json.loads(err)


class TestTrain:
    def test_single_epoch_run_writes_all_artifacts(self, small_data, tmp_path, capsys):
        run_dir = tmp_path / "run"
        code, out, _ = run_cli(
            "train", "--data", str(small_data), "--out", str(run_dir),
            "--epochs", "1", "--seed", "5", capsys=capsys,
        )
        assert code == 0
        history = (run_dir / "history.csv").read_text().strip().splitlines()
        assert len(history) == 2  # header + one epoch
        assert (run_dir / "checkpoint.npz").exists()
        mask = json.loads((run_dir / "mask.json").read_text())
        assert mask["K"] == 1 and mask["T_seg"] == 30
        assert len(mask["masks"]) == 1 and len(mask["masks"][0]) == 30
        metrics = json.loads((run_dir / "metrics.json").read_text())
        assert set(metrics) == {"accuracy", "loss", "K"}
        assert metrics["K"] == 1
        manifest = json.loads((run_dir / "manifest.json").read_text())
        for name in manifest["outputs"]:
            assert (run_dir / name).exists()
        assert manifest["dataset_fingerprint"]
        assert json.loads(out)["K"] == 1

    def test_k_and_search_k_are_mutually_exclusive(self, small_data, tmp_path, capsys):
        code, _, err = run_cli(
            "train", "--data", str(small_data), "--out", str(tmp_path / "r"),
            "--k", "2", "--search-k", capsys=capsys,
        )
        assert code != 0
        assert "mutually exclusive" in json.loads(err)["error"]

    def test_no_ssam_omits_mask_and_reports_null_k(self, small_data, tmp_path, capsys):
        run_dir = tmp_path / "base"
        code, _, _ = run_cli(
            "train", "--data", str(small_data), "--out", str(run_dir),
            "--epochs", "1", "--no-ssam", capsys=capsys,
        )
        assert code == 0
        assert not (run_dir / "mask.json").exists()
        assert json.loads((run_dir / "metrics.json").read_text())["K"] is None

    def test_search_k_writes_candidate_table(self, small_data, tmp_path, capsys):
        run_dir = tmp_path / "searched"
        code, _, _ = run_cli(
            "train", "--data", str(small_data), "--out", str(run_dir),
            "--epochs", "1", "--search-k", "--k-max", "2", capsys=capsys,
        )
        assert code == 0
        lines = (run_dir / "ksearch.csv").read_text().strip().splitlines()
        assert lines[0] == "K,val_loss,selected"
        assert len(lines) == 3
        selected = [line.split(",")[2] for line in lines[1:]]
        assert selected.count("1") == 1

    def test_identical_flags_give_identical_history(self, small_data, tmp_path, capsys):
        dirs = [tmp_path / "r1", tmp_path / "r2"]
        for d in dirs:
            code, _, _ = run_cli(
                "train", "--data", str(small_data), "--out", str(d),
                "--epochs", "2", "--seed", "9", capsys=capsys,
            )
            assert code == 0
        assert (dirs[0] / "history.csv").read_bytes() == (dirs[1] / "history.csv").read_bytes()
        assert (dirs[0] / "metrics.json").read_bytes() == (dirs[1] / "metrics.json").read_bytes()


@pytest.fixture
def trained_run(small_data, tmp_path, capsys):
    run_dir = tmp_path / "trained"
    code, _, _ = run_cli(
        "train", "--data", str(small_data), "--out", str(run_dir),
        "--epochs", "2", "--seed", "5", capsys=capsys,
    )
    assert code == 0
    return run_dir


class TestEvalAndSweep:
    def test_eval_prints_metrics_json(self, trained_run, small_data, capsys):
        code, out, _ = run_cli(
            "eval", "--checkpoint", str(trained_run / "checkpoint.npz"),
            "--data", str(small_data), "--seed", "5", capsys=capsys,
        )
        assert code == 0
        metrics = json.loads(out)
        assert set(metrics) == {"accuracy", "loss", "K"}
        trained = json.loads((trained_run / "metrics.json").read_text())
        assert metrics["accuracy"] == trained["accuracy"]

    def test_noise_sweep_first_row_matches_eval(self, trained_run, small_data, tmp_path, capsys):
        code, out, _ = run_cli(
            "eval", "--checkpoint", str(trained_run / "checkpoint.npz"),
            "--data", str(small_data), "--seed", "5", capsys=capsys,
        )
        eval_acc = json.loads(out)["accuracy"]
        sweep_path = tmp_path / "sweep.csv"
        code, _, _ = run_cli(
            "noise-sweep", "--checkpoint", str(trained_run / "checkpoint.npz"),
            "--data", str(small_data), "--levels", "0,0.5", "--out", str(sweep_path),
            "--seed", "5", capsys=capsys,
        )
        assert code == 0
        lines = sweep_path.read_text().strip().splitlines()
        assert lines[0] == "sigma_rel,accuracy"
        assert float(lines[1].split(",")[1]) == eval_acc

    def test_checkpoint_length_mismatch_is_a_validation_error(self, trained_run, tmp_path, capsys):
        other = gen_synthetic(n_per_class=4, length=20, sigma=1.0, seed=1)
        other_path = tmp_path / "other.csv"
        save_ucr(other, other_path)
        code, _, err = run_cli(
            "eval", "--checkpoint", str(trained_run / "checkpoint.npz"),
            "--data", str(other_path), capsys=capsys,
        )
        assert code != 0
        assert "length" in json.loads(err)["error"]


class TestExportMask:
    def test_untrained_checkpoint_exports_all_ones(self, tmp_path, capsys):
        net = build_ssam_cnn(ModelConfig(input_length=24, num_classes=2, num_segments=3), seed=0)
        ckpt = tmp_path / "fresh.npz"
        save_checkpoint(net, ckpt)
        out_path = tmp_path / "mask.json"
        code, _, _ = run_cli("export-mask", "--checkpoint", str(ckpt),
                             "--out", str(out_path), capsys=capsys)
        assert code == 0
        doc = json.loads(out_path.read_text())
        assert doc["K"] == 3 and doc["T_seg"] == 8
        assert all(all(v == 1.0 for v in mask) for mask in doc["masks"])

    def test_maskless_checkpoint_rejected(self, tmp_path, capsys):
        net = build_ssam_cnn(ModelConfig(input_length=24, num_classes=2, with_ssam=False), seed=0)
        ckpt = tmp_path / "base.npz"
        save_checkpoint(net, ckpt)
        code, _, err = run_cli("export-mask", "--checkpoint", str(ckpt),
                               "--out", str(tmp_path / "m.json"), capsys=capsys)
        assert code != 0
        assert "mask" in json.loads(err)["error"]


class TestReport:
    def test_renders_figures_for_run_artifacts(self, trained_run, tmp_path, capsys):
        sweep_path = trained_run / "noise_sweep.csv"
        run_cli(
            "noise-sweep", "--checkpoint", str(trained_run / "checkpoint.npz"),
            "--data", str(trained_run.parent / "small.csv"),
            "--levels", "0,1", "--out", str(sweep_path), "--seed", "5", capsys=capsys,
        )
        code, out, _ = run_cli("report", "--run", str(trained_run), capsys=capsys)
        assert code == 0
        figures = json.loads(out)["figures"]
        assert (trained_run / "convergence.png").exists()
        assert (trained_run / "masks.png").exists()
        assert (trained_run / "noise_sweep.png").exists()
        assert len(figures) == 3
