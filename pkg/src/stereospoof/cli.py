"""Command-line interface.

Subcommands: ``synth``, ``build-template``, ``train``, ``extract``, ``eval``,
``predict``. Every subcommand accepts ``--config <json>`` and ``--seed``;
explicit flags override config-file values. Exit code 0 on success, 1 with a
stage-tagged diagnostic on stderr otherwise.
"""

import argparse
import json
import sys
from pathlib import Path

from . import io, pipeline
from .errors import StereoSpoofError, ValidationError
from .pipeline import ModelBundle, PipelineConfig, load_inputs, run_eval, run_predict, run_train
from .registration import build_template
from .synth import SynthConfig, synth_generate


def _read_config(path) -> dict:
    if path is None:
        return {}
    data = io.load_json(Path(path))
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    return data


def _pipeline_config(args) -> PipelineConfig:
    data = _read_config(args.config)
    if args.seed is not None:
        data["seed"] = args.seed
    if getattr(args, "expansion", None) is not None:
        data["expansion"] = args.expansion
    if getattr(args, "grid_search", False):
        data["grid_search"] = True
    return PipelineConfig.from_dict(data)


def _cmd_synth(args) -> int:
    data = _read_config(args.config)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.format is not None:
        data["image_format"] = args.format
    cfg = SynthConfig.from_dict(data)
    manifest = synth_generate(cfg, args.out)
    print(f"wrote {manifest}")
    return 0


def _cmd_build_template(args) -> int:
    dataset = load_inputs(args.manifest, args.calibration)
    entries = dataset.split("template")
    if not entries:
        raise ValidationError("manifest has no 'template' split entries")
    faces = [pipeline.abstract_face_of(dataset, e) for e in entries]
    io.save_template(args.out, build_template(faces))
    print(f"wrote {args.out} from {len(entries)} faces")
    return 0


def _cmd_train(args) -> int:
    config = _pipeline_config(args)
    dataset = load_inputs(args.manifest, args.calibration)
    run_train(dataset, config, out_dir=args.out, verbose=True)
    print(f"wrote model bundle to {args.out}")
    return 0


def _cmd_extract(args) -> int:
    config = _pipeline_config(args)
    dataset = load_inputs(args.manifest, args.calibration)
    bundle = ModelBundle.load(args.bundle)
    entries, x_tfbd, x_spmt, _ = pipeline.extract_split_features(
        dataset, bundle, args.split, config, verbose=True
    )
    out = Path(args.out)
    io.write_features(out / f"features_tfbd_{args.split}.bin", x_tfbd)
    io.write_features(out / f"features_spmt_{args.split}.bin", x_spmt)
    io.dump_json(
        out / f"samples_{args.split}.json",
        [{"landmarks": e.landmarks, "label": e.label} for e in entries],
    )
    print(f"wrote {len(entries)} feature rows to {out}")
    return 0


def _cmd_eval(args) -> int:
    config = _pipeline_config(args)
    dataset = load_inputs(args.manifest, args.calibration)
    bundle = ModelBundle.load(args.bundle)
    reports = run_eval(dataset, bundle, config, out_dir=args.out, verbose=True)
    for name, rep in reports.items():
        print(f"{name}: accuracy={rep.accuracy:.4f} auc={rep.auc:.4f} eer={rep.eer:.4f}")
    print(f"wrote reports to {args.out}")
    return 0


def _cmd_predict(args) -> int:
    config = _pipeline_config(args)
    dataset = load_inputs(args.manifest, args.calibration)
    bundle = ModelBundle.load(args.bundle)
    results = run_predict(dataset, bundle, split=args.split, config=config)
    text = json.dumps(results, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(results)} predictions to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _add_common(parser, manifest=True, bundle=False):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="root random seed (overrides config)")
    if manifest:
        parser.add_argument("--manifest", required=True, help="dataset manifest JSON")
        parser.add_argument("--calibration", required=True, help="stereo calibration JSON")
        parser.add_argument("--expansion", type=float, help="face box expansion factor")
    if bundle:
        parser.add_argument("--bundle", required=True, help="model bundle directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stereospoof",
        description="Binocular face anti-spoofing: depth + micro-texture features with SVM fusion",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic stereo-face dataset")
    _add_common(p, manifest=False)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--format", choices=("pgm", "png"), help="image format (default pgm)")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("build-template", help="average the template split into a template face")
    _add_common(p)
    p.add_argument("--out", required=True, help="output template JSON path")
    p.set_defaults(func=_cmd_build_template)

    p = sub.add_parser("train", help="train all model components into a bundle directory")
    _add_common(p)
    p.add_argument("--out", required=True, help="output bundle directory")
    p.add_argument("--grid-search", action="store_true", help="grid-search SVM C and gamma")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("extract", help="extract feature vectors for one split")
    _add_common(p, bundle=True)
    p.add_argument("--split", default="train", choices=pipeline.SPLITS)
    p.add_argument("--out", required=True, help="output directory for feature containers")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("eval", help="evaluate a bundle on the test split")
    _add_common(p, bundle=True)
    p.add_argument("--out", required=True, help="output directory for reports and ROC CSVs")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("predict", help="score samples with a trained bundle")
    _add_common(p, bundle=True)
    p.add_argument("--split", default="test", choices=pipeline.SPLITS)
    p.add_argument("--out", help="output JSON path (default: stdout)")
    p.set_defaults(func=_cmd_predict)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StereoSpoofError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
