import json

import numpy as np
import pytest

from stereospoof import io
from stereospoof.cli import main


@pytest.fixture(scope="module")
def cli_workspace(tmp_path_factory):
    """End-to-end CLI run: synth -> train -> (other commands test against it)."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    config = root / "synth.json"
    config.write_text(
        json.dumps(
            {
                "n_template": 4,
                "n_train_per_class": 8,
                "n_average_per_class": 4,
                "n_test_per_class": 6,
            }
        )
    )
    assert main(["synth", "--out", str(data), "--seed", "11", "--config", str(config)]) == 0

    train_config = root / "train.json"
    train_config.write_text(
        json.dumps({"codebook_k": 64, "codebook_max_samples": 20000, "codebook_max_iters": 25})
    )
    bundle = root / "bundle"
    assert (
        main(
            [
                "train",
                "--manifest", str(data / "manifest.json"),
                "--calibration", str(data / "calibration.json"),
                "--out", str(bundle),
                "--seed", "3",
                "--config", str(train_config),
            ]
        )
        == 0
    )
    return root, data, bundle


class TestCliFlow:
    def test_bundle_files_written(self, cli_workspace):
        _, _, bundle = cli_workspace
        for name in (
            "template.json", "codebook.json", "avg_pos.json", "avg_neg.json",
            "svm_tfbd.json", "svm_spmt.json", "scaler_tfbd.json", "scaler_spmt.json",
            "fusion.json", "meta.json",
        ):
            assert (bundle / name).exists(), name

    def test_build_template_command(self, cli_workspace):
        root, data, _ = cli_workspace
        out = root / "template.json"
        code = main(
            [
                "build-template",
                "--manifest", str(data / "manifest.json"),
                "--calibration", str(data / "calibration.json"),
                "--out", str(out),
            ]
        )
        assert code == 0
        template = io.load_template(out)
        assert template.points.shape == (68, 3)

    def test_eval_command_writes_reports(self, cli_workspace):
        root, data, bundle = cli_workspace
        out = root / "eval"
        code = main(
            [
                "eval",
                "--manifest", str(data / "manifest.json"),
                "--calibration", str(data / "calibration.json"),
                "--bundle", str(bundle),
                "--out", str(out),
            ]
        )
        assert code == 0
        report = json.loads((out / "eval_report.json").read_text())
        assert set(report) == {"tfbd", "spmt", "fused"}
        assert (out / "roc_fused.csv").exists()

    def test_extract_command_writes_containers(self, cli_workspace):
        root, data, bundle = cli_workspace
        out = root / "features"
        code = main(
            [
                "extract",
                "--manifest", str(data / "manifest.json"),
                "--calibration", str(data / "calibration.json"),
                "--bundle", str(bundle),
                "--split", "test",
                "--out", str(out),
            ]
        )
        assert code == 0
        tfbd = io.read_features(out / "features_tfbd_test.bin")
        spmt = io.read_features(out / "features_spmt_test.bin")
        assert tfbd.shape == (12, 68)
        assert spmt.shape == (12, 3328)
        assert (out / "features_tfbd_test.csv").exists()
        assert (out / "features_spmt_test.csv").exists()
        samples = json.loads((out / "samples_test.json").read_text())
        assert len(samples) == 12

    def test_predict_command(self, cli_workspace, capsys):
        root, data, bundle = cli_workspace
        out = root / "predictions.json"
        code = main(
            [
                "predict",
                "--manifest", str(data / "manifest.json"),
                "--calibration", str(data / "calibration.json"),
                "--bundle", str(bundle),
                "--out", str(out),
            ]
        )
        assert code == 0
        predictions = json.loads(out.read_text())
        assert len(predictions) == 12
        assert all(p["label"] in ("live", "fake") for p in predictions)


class TestCliErrors:
    def test_missing_manifest_is_stage_tagged_failure(self, cli_workspace, tmp_path, capsys):
        _, data, bundle = cli_workspace
        code = main(
            [
                "eval",
                "--manifest", str(tmp_path / "nope.json"),
                "--calibration", str(data / "calibration.json"),
                "--bundle", str(bundle),
                "--out", str(tmp_path),
            ]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_bad_config_key_fails(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"n_tempalte": 4}))
        code = main(["synth", "--out", str(tmp_path / "d"), "--config", str(bad)])
        assert code == 1
        assert "unknown" in capsys.readouterr().err

    def test_usage_error_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["train"])  # missing required flags
        assert exc.value.code == 2


class TestCliExpansionFlag:
    def test_expansion_changes_features(self, cli_workspace, tmp_path):
        root, data, bundle = cli_workspace
        outs = []
        for expansion, name in ((1.0, "a"), (1.6, "b")):
            out = tmp_path / name
            code = main(
                [
                    "extract",
                    "--manifest", str(data / "manifest.json"),
                    "--calibration", str(data / "calibration.json"),
                    "--bundle", str(bundle),
                    "--split", "test",
                    "--out", str(out),
                    "--expansion", str(expansion),
                ]
            )
            assert code == 0
            outs.append(io.read_features(out / "features_spmt_test.bin"))
        assert not np.allclose(outs[0], outs[1])
