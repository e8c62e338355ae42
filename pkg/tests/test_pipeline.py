import json

import numpy as np
import pytest

from conftest import TINY_PIPELINE
from stereospoof import io
from stereospoof.errors import StageError, ValidationError
from stereospoof.pipeline import (
    ModelBundle,
    PipelineConfig,
    load_inputs,
    run_eval,
    run_predict,
    run_train,
)


def write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")


def valid_landmarks():
    return {
        "points": [
            {"i": i, "ul": 100.0 + i, "vl": 120.0, "ur": 90.0 + i, "vr": 120.0}
            for i in range(1, 69)
        ]
    }


def valid_calibration():
    return {
        "left": {"fx": 500.0, "fy": 500.0, "cx": 320.0, "cy": 240.0},
        "right": {"fx": 500.0, "fy": 500.0, "cx": 320.0, "cy": 240.0},
        "E": [1, 0, 0, 0, 1, 0, 0, 0, 1],
        "V": [60.0, 0.0, 0.0],
        "unit": "mm",
    }


class TestLoadInputs:
    def _minimal(self, tmp_path, landmarks=None, calibration=None, split="train"):
        from PIL import Image

        img = Image.new("L", (64, 48), 128)
        img.save(tmp_path / "l.png")
        img.save(tmp_path / "r.png")
        write_json(tmp_path / "lm.json", landmarks or valid_landmarks())
        write_json(tmp_path / "calib.json", calibration or valid_calibration())
        manifest = [
            {"left": "l.png", "right": "r.png", "landmarks": "lm.json", "label": "live", "split": split}
        ]
        write_json(tmp_path / "manifest.json", manifest)
        return tmp_path / "manifest.json", tmp_path / "calib.json"

    def test_single_valid_entry(self, tmp_path):
        manifest, calib = self._minimal(tmp_path)
        dataset = load_inputs(manifest, calib)
        assert len(dataset.entries) == 1
        assert len(dataset.entries[0].keypoints) == 68

    def test_wrong_landmark_count_names_file(self, tmp_path):
        bad = valid_landmarks()
        bad["points"] = bad["points"][:67]
        manifest, calib = self._minimal(tmp_path, landmarks=bad)
        with pytest.raises(ValidationError, match="lm.json"):
            load_inputs(manifest, calib)

    def test_non_rotation_calibration_rejected(self, tmp_path):
        bad = valid_calibration()
        bad["E"] = [1, 0, 0, 0, 1, 0, 0, 0, -1]
        manifest, calib = self._minimal(tmp_path, calibration=bad)
        with pytest.raises(ValidationError, match="rotation"):
            load_inputs(manifest, calib)

    def test_missing_image_named_with_entry_index(self, tmp_path):
        manifest, calib = self._minimal(tmp_path)
        (tmp_path / "r.png").unlink()
        with pytest.raises(ValidationError, match="entry 0"):
            load_inputs(manifest, calib)

    def test_path_in_two_splits_rejected(self, tmp_path):
        manifest, calib = self._minimal(tmp_path)
        entries = json.loads(manifest.read_text())
        dup = dict(entries[0])
        dup["split"] = "test"
        entries.append(dup)
        write_json(manifest, entries)
        with pytest.raises(ValidationError, match="both"):
            load_inputs(manifest, calib)

    def test_bad_label_rejected(self, tmp_path):
        manifest, calib = self._minimal(tmp_path)
        entries = json.loads(manifest.read_text())
        entries[0]["label"] = "genuine"
        write_json(manifest, entries)
        with pytest.raises(ValidationError, match="label"):
            load_inputs(manifest, calib)


class TestRunTrain:
    def test_bundle_components_consistent(self, tiny_bundle):
        assert tiny_bundle.svm_tfbd.dim == 68
        assert tiny_bundle.svm_spmt.dim == 3328
        assert tiny_bundle.codebook.k == TINY_PIPELINE.codebook_k
        assert tiny_bundle.avg_pos.class_tag == "positive"
        assert tiny_bundle.avg_neg.class_tag == "negative"
        assert tiny_bundle.meta["counts"]["train"] == 16

    def test_save_load_roundtrip(self, tiny_bundle, tmp_path):
        tiny_bundle.save(tmp_path / "bundle")
        loaded = ModelBundle.load(tmp_path / "bundle")
        assert np.allclose(loaded.template.points, tiny_bundle.template.points)
        assert np.allclose(loaded.codebook.words, tiny_bundle.codebook.words)
        assert np.array_equal(loaded.avg_pos.codes, tiny_bundle.avg_pos.codes)
        assert np.allclose(loaded.svm_spmt.dual_coef, tiny_bundle.svm_spmt.dual_coef)
        assert loaded.fusion.weights == tiny_bundle.fusion.weights
        assert loaded.meta == tiny_bundle.meta

    def test_rerun_is_byte_identical(self, tiny_dataset, tmp_path):
        cfg = TINY_PIPELINE
        run_train(tiny_dataset, cfg, out_dir=tmp_path / "a")
        run_train(tiny_dataset, cfg, out_dir=tmp_path / "b")
        for name in sorted(p.name for p in (tmp_path / "a").iterdir()):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name

    def test_incomplete_bundle_rejected(self, tiny_bundle, tmp_path):
        tiny_bundle.save(tmp_path / "bundle")
        (tmp_path / "bundle" / "codebook.json").unlink()
        with pytest.raises(ValidationError, match="codebook.json"):
            ModelBundle.load(tmp_path / "bundle")

    def test_empty_template_split_rejected(self, tiny_dataset_dir):
        manifest = json.loads((tiny_dataset_dir / "manifest.json").read_text())
        no_template = [e for e in manifest if e["split"] != "template"]
        alt = tiny_dataset_dir / "manifest_no_template.json"
        write_json(alt, no_template)
        dataset = load_inputs(alt, tiny_dataset_dir / "calibration.json")
        with pytest.raises(StageError, match="template"):
            run_train(dataset, TINY_PIPELINE)

    def test_unknown_config_key_rejected(self):
        with pytest.raises(ValidationError, match="unknown"):
            PipelineConfig.from_dict({"svm_c": 2.0})

    def test_grid_search_trains_working_bundle(self, tiny_dataset):
        import dataclasses

        cfg = dataclasses.replace(TINY_PIPELINE, grid_search=True)
        bundle = run_train(tiny_dataset, cfg)
        reports = run_eval(tiny_dataset, bundle, cfg)
        assert reports["fused"].accuracy >= 0.9


class TestRunEval:
    def test_reports_and_artifacts(self, tiny_dataset, tiny_bundle, tmp_path):
        reports = run_eval(tiny_dataset, tiny_bundle, TINY_PIPELINE, out_dir=tmp_path)
        assert set(reports) == {"tfbd", "spmt", "fused"}
        for rep in reports.values():
            assert 0.0 <= rep.eer <= 1.0 and 0.0 <= rep.auc <= 1.0
        assert reports["fused"].accuracy >= 0.9  # tiny but cleanly separable
        report_doc = json.loads((tmp_path / "eval_report.json").read_text())
        assert set(report_doc) == {"tfbd", "spmt", "fused"}
        for name in ("tfbd", "spmt", "fused"):
            assert {"accuracy", "auc", "eer"} <= set(report_doc[name])
            csv_lines = (tmp_path / f"roc_{name}.csv").read_text().splitlines()
            assert csv_lines[0] == "fpr,tpr"
            assert len(csv_lines) >= 3

    def test_refuses_bundle_trained_on_test_samples(self, tiny_dataset_dir, tiny_bundle):
        manifest = json.loads((tiny_dataset_dir / "manifest.json").read_text())
        leaked = []
        for e in manifest:
            e = dict(e)
            if e["split"] == "train":
                e["split"] = "test"
                leaked.append(e)
            elif e["split"] == "test":
                continue
            else:
                leaked.append(e)
        alt = tiny_dataset_dir / "manifest_leaky.json"
        write_json(alt, leaked)
        dataset = load_inputs(alt, tiny_dataset_dir / "calibration.json")
        with pytest.raises(StageError, match="trained on"):
            run_eval(dataset, tiny_bundle, TINY_PIPELINE)

    def test_dimension_mismatch_rejected(self, tiny_dataset, tiny_bundle):
        import dataclasses

        broken_svm = dataclasses.replace(tiny_bundle.svm_tfbd, dim=67)
        bundle = ModelBundle(
            template=tiny_bundle.template,
            codebook=tiny_bundle.codebook,
            avg_pos=tiny_bundle.avg_pos,
            avg_neg=tiny_bundle.avg_neg,
            svm_tfbd=broken_svm,
            svm_spmt=tiny_bundle.svm_spmt,
            scaler_tfbd=tiny_bundle.scaler_tfbd,
            scaler_spmt=tiny_bundle.scaler_spmt,
            fusion=tiny_bundle.fusion,
            meta=tiny_bundle.meta,
        )
        with pytest.raises(StageError):
            run_eval(tiny_dataset, bundle, TINY_PIPELINE)


class TestRunPredict:
    def test_prediction_schema_and_quality(self, tiny_dataset, tiny_bundle):
        results = run_predict(tiny_dataset, tiny_bundle, split="test", config=TINY_PIPELINE)
        assert len(results) == 12
        correct = 0
        for result, entry in zip(results, tiny_dataset.split("test")):
            assert {"landmarks", "right", "score_tfbd", "score_spmt", "score_fused", "label"} <= set(result)
            correct += result["label"] == entry.label
        assert correct >= 10


class TestFeatureContainer:
    def test_roundtrip_and_csv_mirror(self, tmp_path, rng):
        X = rng.normal(0, 1, (7, 5))
        io.write_features(tmp_path / "feat.bin", X)
        back = io.read_features(tmp_path / "feat.bin")
        assert np.array_equal(back, X)
        csv = np.loadtxt(tmp_path / "feat.csv", delimiter=",")
        assert np.array_equal(csv, X)  # %.17g preserves doubles exactly

    def test_truncated_container_rejected(self, tmp_path):
        io.write_features(tmp_path / "feat.bin", np.zeros((3, 4)))
        data = (tmp_path / "feat.bin").read_bytes()
        (tmp_path / "feat.bin").write_bytes(data[:-8])
        with pytest.raises(ValidationError):
            io.read_features(tmp_path / "feat.bin")
