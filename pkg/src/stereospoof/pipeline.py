"""Batch orchestration: manifest/calibration loading, model training,
feature extraction, evaluation, and prediction.

A dataset is a JSON manifest of stereo samples (left image, right image,
landmark file, class label, split) plus one calibration file. Training
consumes the ``template``, ``train``, and ``average`` splits and persists a
model bundle directory; evaluation scores the ``test`` split against a
bundle and refuses bundles whose training samples overlap it.
"""

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .classifier import (
    EvalReport,
    FeatureScaler,
    FusionRule,
    SvmModel,
    evaluate,
    grid_search_svm,
    train_svm,
)
from .codebook import AverageFace, BovwCodeFace, Codebook, build_average_face, encode_bovw, train_codebook
from .errors import StageError, StereoSpoofError, ValidationError
from .geometry import AbstractFace, KeypointPair, StereoRig, build_abstract_face
from .pyramid import compute_spmt
from .registration import (
    RegistrationConfig,
    TemplateFace,
    build_template,
    extract_tfbd,
    register_iterative,
)
from .texture import DEFAULT_EXPANSION, FaceCrop, MslbpFeatureFace, Rect, crop_and_normalize, mslbp_face

SPLITS = ("template", "train", "average", "test")
LABELS = ("live", "fake")

BUNDLE_FILES = (
    "template.json",
    "codebook.json",
    "avg_pos.json",
    "avg_neg.json",
    "svm_tfbd.json",
    "svm_spmt.json",
    "scaler_tfbd.json",
    "scaler_spmt.json",
    "fusion.json",
    "meta.json",
)


@dataclass(frozen=True)
class ManifestEntry:
    left: str
    right: str
    landmarks: str
    label: str
    split: str
    keypoints: tuple[KeypointPair, ...] = field(default=(), repr=False)

    def key(self) -> str:
        digest = hashlib.sha256(f"{self.left}|{self.right}|{self.landmarks}".encode())
        return digest.hexdigest()

    @property
    def y(self) -> int:
        return 1 if self.label == "live" else -1


@dataclass(frozen=True)
class Dataset:
    base_dir: Path
    rig: StereoRig
    unit: str
    entries: tuple[ManifestEntry, ...]

    def split(self, name: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == name]

    def path(self, rel: str) -> Path:
        return self.base_dir / rel


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    expansion: float = DEFAULT_EXPANSION
    rounds: int = 20
    trim_size: int = 20
    codebook_k: int = 256
    codebook_faces: int = 3000
    codebook_max_samples: int = 200_000
    codebook_max_iters: int = 100
    svm_C: float = 1.0
    svm_gamma: float | None = None
    svm_tol: float = 1e-3
    grid_search: bool = False
    grid_val_fraction: float = 0.25
    fusion_weights: tuple[float, float] = (0.5, 0.5)
    fusion_threshold: float = 0.0

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})

    def hash(self) -> str:
        canonical = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()


def load_inputs(manifest_path, calibration_path) -> Dataset:
    """Load and validate a manifest plus calibration.

    Every entry must point at existing files, every landmark file must carry
    exactly 68 indexed points, and no file may appear in more than one split.
    Problems are aggregated into one error naming each entry and file.
    """
    manifest_path = Path(manifest_path)
    calibration = io.load_calibration(calibration_path)
    raw = io.load_json(manifest_path)
    if not isinstance(raw, list):
        raise ValidationError(f"{manifest_path}: manifest must be a JSON array")

    base_dir = manifest_path.parent
    problems: list[str] = []
    entries: list[ManifestEntry] = []
    path_split: dict[str, str] = {}
    for i, item in enumerate(raw):
        where = f"{manifest_path} entry {i}"
        if not isinstance(item, dict):
            problems.append(f"{where}: not an object")
            continue
        missing = [k for k in ("left", "right", "landmarks", "label", "split") if k not in item]
        if missing:
            problems.append(f"{where}: missing keys {missing}")
            continue
        if item["label"] not in LABELS:
            problems.append(f"{where}: label must be one of {LABELS}, got {item['label']!r}")
            continue
        if item["split"] not in SPLITS:
            problems.append(f"{where}: split must be one of {SPLITS}, got {item['split']!r}")
            continue
        ok = True
        for k in ("left", "right", "landmarks"):
            rel = str(item[k])
            if not (base_dir / rel).exists():
                problems.append(f"{where}: {k} file not found: {base_dir / rel}")
                ok = False
            prev = path_split.setdefault(rel, item["split"])
            if prev != item["split"]:
                problems.append(f"{where}: {rel} appears in both {prev!r} and {item['split']!r} splits")
                ok = False
        if not ok:
            continue
        try:
            keypoints = tuple(io.load_landmarks(base_dir / str(item["landmarks"])))
        except ValidationError as exc:
            problems.append(f"{where}: {exc}")
            continue
        entries.append(
            ManifestEntry(
                left=str(item["left"]),
                right=str(item["right"]),
                landmarks=str(item["landmarks"]),
                label=item["label"],
                split=item["split"],
                keypoints=keypoints,
            )
        )

    if problems:
        raise ValidationError("manifest validation failed:\n  " + "\n  ".join(problems))
    return Dataset(base_dir=base_dir, rig=calibration.rig, unit=calibration.unit, entries=tuple(entries))


@dataclass
class ModelBundle:
    template: TemplateFace
    codebook: Codebook
    avg_pos: AverageFace
    avg_neg: AverageFace
    svm_tfbd: SvmModel
    svm_spmt: SvmModel
    scaler_tfbd: FeatureScaler
    scaler_spmt: FeatureScaler
    fusion: FusionRule
    meta: dict

    def save(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        io.save_template(out_dir / "template.json", self.template)
        io.save_codebook(out_dir / "codebook.json", self.codebook)
        io.save_average_face(out_dir / "avg_pos.json", self.avg_pos)
        io.save_average_face(out_dir / "avg_neg.json", self.avg_neg)
        io.save_svm(out_dir / "svm_tfbd.json", self.svm_tfbd)
        io.save_svm(out_dir / "svm_spmt.json", self.svm_spmt)
        io.save_scaler(out_dir / "scaler_tfbd.json", self.scaler_tfbd)
        io.save_scaler(out_dir / "scaler_spmt.json", self.scaler_spmt)
        io.save_fusion(out_dir / "fusion.json", self.fusion)
        io.dump_json(out_dir / "meta.json", self.meta)
        return out_dir

    @classmethod
    def load(cls, bundle_dir) -> "ModelBundle":
        bundle_dir = Path(bundle_dir)
        missing = [name for name in BUNDLE_FILES if not (bundle_dir / name).exists()]
        if missing:
            raise ValidationError(f"{bundle_dir}: incomplete model bundle, missing {missing}")
        return cls(
            template=io.load_template(bundle_dir / "template.json"),
            codebook=io.load_codebook(bundle_dir / "codebook.json"),
            avg_pos=io.load_average_face(bundle_dir / "avg_pos.json"),
            avg_neg=io.load_average_face(bundle_dir / "avg_neg.json"),
            svm_tfbd=io.load_svm(bundle_dir / "svm_tfbd.json"),
            svm_spmt=io.load_svm(bundle_dir / "svm_spmt.json"),
            scaler_tfbd=io.load_scaler(bundle_dir / "scaler_tfbd.json"),
            scaler_spmt=io.load_scaler(bundle_dir / "scaler_spmt.json"),
            fusion=io.load_fusion(bundle_dir / "fusion.json"),
            meta=io.load_json(bundle_dir / "meta.json"),
        )


# ---------------------------------------------------------------------------
# Per-sample feature extraction


def abstract_face_of(dataset: Dataset, entry: ManifestEntry) -> AbstractFace:
    return build_abstract_face(dataset.rig, list(entry.keypoints))


def face_crop_of(dataset: Dataset, entry: ManifestEntry, expansion: float) -> FaceCrop:
    image = io.read_image(dataset.path(entry.right))
    xs = [kp.u_r for kp in entry.keypoints]
    ys = [kp.v_r for kp in entry.keypoints]
    return crop_and_normalize(image, Rect.bounding(xs, ys), expansion)


def tfbd_of(face: AbstractFace, template: TemplateFace, config: PipelineConfig) -> np.ndarray:
    reg_cfg = RegistrationConfig(rounds=config.rounds, trim_size=config.trim_size)
    result = register_iterative(face, template, reg_cfg)
    return extract_tfbd(result.points).values


def spmt_of(
    mslbp: MslbpFeatureFace, cb: Codebook, avg_pos: AverageFace, avg_neg: AverageFace
) -> np.ndarray:
    return compute_spmt(encode_bovw(mslbp, cb), avg_pos, avg_neg).values


def _stage(stage: str, fn, *args, sample_index: int | None = None):
    try:
        return fn(*args)
    except StageError:
        raise
    except (StereoSpoofError, OSError) as exc:  # OSError covers unreadable image files
        raise StageError(stage, str(exc), sample_index) from exc


class _Timer:
    def __init__(self, verbose: bool):
        self.verbose = verbose
        self.timings: dict[str, float] = {}

    def run(self, stage: str, fn, n_samples: int | None = None):
        start = time.perf_counter()
        result = fn()
        elapsed = time.perf_counter() - start
        self.timings[stage] = elapsed
        if self.verbose:
            per = f" ({1000.0 * elapsed / n_samples:.1f} ms/sample)" if n_samples else ""
            print(f"[{stage}] {elapsed:.2f}s{per}")
        return result


def _mslbp_faces(dataset, entries, expansion, stage, timer):
    def compute():
        faces = []
        for i, entry in enumerate(entries):
            crop = _stage(stage, face_crop_of, dataset, entry, expansion, sample_index=i)
            faces.append(_stage(stage, mslbp_face, crop, sample_index=i))
        return faces

    return timer.run(stage, compute, n_samples=len(entries))


def run_train(
    dataset: Dataset,
    config: PipelineConfig = PipelineConfig(),
    out_dir=None,
    verbose: bool = False,
) -> ModelBundle:
    """Train every model component and optionally persist the bundle.

    Deterministic for fixed (dataset, config): all randomness derives from
    ``config.seed``. Per-stage wall-clock timings go to stdout when
    ``verbose``; they are never persisted, so reruns are byte-identical.
    """
    for split in SPLITS[:3]:
        if not dataset.split(split):
            raise StageError("inputs", f"split {split!r} is empty")
    timer = _Timer(verbose)
    seeds = np.random.SeedSequence(config.seed).spawn(5)
    seed_ints = [int(s.generate_state(1)[0]) for s in seeds]

    template_entries = dataset.split("template")
    train_entries = dataset.split("train")
    average_entries = dataset.split("average")

    def build_template_stage():
        faces = [
            _stage("template", abstract_face_of, dataset, e, sample_index=i)
            for i, e in enumerate(template_entries)
        ]
        return build_template(faces)

    template = timer.run("template", build_template_stage, len(template_entries))

    train_mslbp = _mslbp_faces(dataset, train_entries, config.expansion, "mslbp-train", timer)

    def codebook_stage():
        rng = np.random.default_rng(seeds[0])
        n_faces = min(config.codebook_faces, len(train_mslbp))
        chosen = rng.choice(len(train_mslbp), size=n_faces, replace=False)
        vectors = np.concatenate([train_mslbp[i].vectors() for i in chosen], axis=0)
        if vectors.shape[0] > config.codebook_max_samples:
            sub = rng.choice(vectors.shape[0], size=config.codebook_max_samples, replace=False)
            vectors = vectors[sub]
        return train_codebook(
            vectors, k=config.codebook_k, seed=seed_ints[1], max_iters=config.codebook_max_iters
        )

    cb = timer.run("codebook", lambda: _stage("codebook", codebook_stage))

    def average_stage():
        faces = _mslbp_faces(dataset, average_entries, config.expansion, "mslbp-average", timer)
        coded = [encode_bovw(f, cb) for f in faces]
        by_class: dict[str, list[BovwCodeFace]] = {"live": [], "fake": []}
        for entry, code_face in zip(average_entries, coded):
            by_class[entry.label].append(code_face)
        if not by_class["live"] or not by_class["fake"]:
            raise ValidationError("average split must contain both classes")
        avg_pos = build_average_face(by_class["live"], ["positive"] * len(by_class["live"]))
        avg_neg = build_average_face(by_class["fake"], ["negative"] * len(by_class["fake"]))
        return avg_pos, avg_neg

    avg_pos, avg_neg = timer.run("average", lambda: _stage("average", average_stage))

    def features_stage():
        x_tfbd = np.empty((len(train_entries), 68))
        x_spmt = np.empty((len(train_entries), 3328))
        for i, entry in enumerate(train_entries):
            face = _stage("features-train", abstract_face_of, dataset, entry, sample_index=i)
            x_tfbd[i] = _stage("features-train", tfbd_of, face, template, config, sample_index=i)
            x_spmt[i] = _stage(
                "features-train", spmt_of, train_mslbp[i], cb, avg_pos, avg_neg, sample_index=i
            )
        y = np.array([e.y for e in train_entries])
        return x_tfbd, x_spmt, y

    x_tfbd, x_spmt, y = timer.run("features-train", features_stage, len(train_entries))

    def svm_stage():
        if np.unique(y).size < 2:
            raise ValidationError("train split must contain both classes")
        scaler_tfbd = FeatureScaler.fit(x_tfbd)
        scaler_spmt = FeatureScaler.fit(x_spmt)
        models = []
        for X, scaler, svm_seed in (
            (x_tfbd, scaler_tfbd, seed_ints[2]),
            (x_spmt, scaler_spmt, seed_ints[3]),
        ):
            Xs = scaler.transform(X)
            C, gamma = config.svm_C, config.svm_gamma
            if config.grid_search:
                tr_idx, val_idx = _stratified_split(y, config.grid_val_fraction, seeds[4])
                C, gamma = grid_search_svm(
                    Xs[tr_idx], y[tr_idx], Xs[val_idx], y[val_idx], tol=config.svm_tol, seed=svm_seed
                )
            models.append(train_svm(Xs, y, C=C, gamma=gamma, tol=config.svm_tol, seed=svm_seed))
        return scaler_tfbd, scaler_spmt, models[0], models[1]

    scaler_tfbd, scaler_spmt, svm_tfbd, svm_spmt = timer.run(
        "svm", lambda: _stage("svm", svm_stage)
    )

    trained_keys = sorted(
        e.key() for e in template_entries + train_entries + average_entries
    )
    meta = {
        "format_version": 1,
        "seed": config.seed,
        "config_hash": config.hash(),
        "unit": dataset.unit,
        "counts": {s: len(dataset.split(s)) for s in SPLITS},
        "train_sample_keys": trained_keys,
    }
    bundle = ModelBundle(
        template=template,
        codebook=cb,
        avg_pos=avg_pos,
        avg_neg=avg_neg,
        svm_tfbd=svm_tfbd,
        svm_spmt=svm_spmt,
        scaler_tfbd=scaler_tfbd,
        scaler_spmt=scaler_spmt,
        fusion=FusionRule(weights=config.fusion_weights, threshold=config.fusion_threshold),
        meta=meta,
    )
    if out_dir is not None:
        timer.run("persist", lambda: bundle.save(out_dir))
    return bundle


def _stratified_split(y: np.ndarray, val_fraction: float, seed_seq) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed_seq)
    train_idx, val_idx = [], []
    for cls in (-1, 1):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        n_val = max(1, int(round(idx.size * val_fraction)))
        val_idx.append(idx[:n_val])
        train_idx.append(idx[n_val:])
    return np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(val_idx))


def extract_split_features(
    dataset: Dataset,
    bundle: ModelBundle,
    split: str,
    config: PipelineConfig = PipelineConfig(),
    verbose: bool = False,
    stage: str = "features",
):
    """(entries, X_tfbd, X_spmt, y) for one split, using bundle components."""
    entries = dataset.split(split)
    if not entries:
        raise StageError(stage, f"split {split!r} is empty")
    timer = _Timer(verbose)
    mslbp_faces = _mslbp_faces(dataset, entries, config.expansion, f"{stage}-mslbp", timer)

    def compute():
        x_tfbd = np.empty((len(entries), 68))
        x_spmt = np.empty((len(entries), 3328))
        for i, entry in enumerate(entries):
            face = _stage(stage, abstract_face_of, dataset, entry, sample_index=i)
            x_tfbd[i] = _stage(stage, tfbd_of, face, bundle.template, config, sample_index=i)
            x_spmt[i] = _stage(
                stage, spmt_of, mslbp_faces[i], bundle.codebook, bundle.avg_pos, bundle.avg_neg,
                sample_index=i,
            )
        return x_tfbd, x_spmt

    x_tfbd, x_spmt = timer.run(stage, compute, len(entries))
    y = np.array([e.y for e in entries])
    return entries, x_tfbd, x_spmt, y


def score_features(bundle: ModelBundle, x_tfbd: np.ndarray, x_spmt: np.ndarray):
    """Decision scores (tfbd, spmt, fused) for standardized feature rows."""
    s_tfbd = bundle.svm_tfbd.decision(bundle.scaler_tfbd.transform(x_tfbd))
    s_spmt = bundle.svm_spmt.decision(bundle.scaler_spmt.transform(x_spmt))
    w1, w2 = bundle.fusion.weights
    return s_tfbd, s_spmt, w1 * s_tfbd + w2 * s_spmt


def run_eval(
    dataset: Dataset,
    bundle: ModelBundle,
    config: PipelineConfig = PipelineConfig(),
    out_dir=None,
    verbose: bool = False,
) -> dict[str, EvalReport]:
    """Score the test split and report TFBD-only, SPMT-only, and fused
    metrics; refuses bundles trained on any test sample."""
    test_entries = dataset.split("test")
    if not test_entries:
        raise StageError("eval", "test split is empty")
    trained = set(bundle.meta.get("train_sample_keys", ()))
    overlap = [e.landmarks for e in test_entries if e.key() in trained]
    if overlap:
        raise StageError(
            "eval", f"bundle was trained on {len(overlap)} test sample(s), e.g. {overlap[0]}"
        )

    entries, x_tfbd, x_spmt, y = extract_split_features(
        dataset, bundle, "test", config, verbose, stage="eval"
    )
    s_tfbd, s_spmt, s_fused = _stage("eval", score_features, bundle, x_tfbd, x_spmt)
    threshold = bundle.fusion.threshold
    reports = {
        "tfbd": _stage("eval", evaluate, s_tfbd, y, threshold),
        "spmt": _stage("eval", evaluate, s_spmt, y, threshold),
        "fused": _stage("eval", evaluate, s_fused, y, threshold),
    }

    if out_dir is not None:
        out_dir = Path(out_dir)
        io.dump_json(
            out_dir / "eval_report.json", {name: rep.to_dict() for name, rep in reports.items()}
        )
        for name, rep in reports.items():
            lines = ["fpr,tpr"] + [f"{fpr:.17g},{tpr:.17g}" for fpr, tpr in rep.roc]
            (out_dir / f"roc_{name}.csv").write_text("\n".join(lines) + "\n")
    return reports


def run_predict(
    dataset: Dataset,
    bundle: ModelBundle,
    split: str = "test",
    config: PipelineConfig = PipelineConfig(),
    verbose: bool = False,
) -> list[dict]:
    """Per-sample scores and fused labels for one split."""
    entries, x_tfbd, x_spmt, _ = extract_split_features(
        dataset, bundle, split, config, verbose, stage="predict"
    )
    s_tfbd, s_spmt, s_fused = score_features(bundle, x_tfbd, x_spmt)
    results = []
    for i, entry in enumerate(entries):
        results.append(
            {
                "landmarks": entry.landmarks,
                "right": entry.right,
                "score_tfbd": float(s_tfbd[i]),
                "score_spmt": float(s_spmt[i]),
                "score_fused": float(s_fused[i]),
                "label": "live" if s_fused[i] >= bundle.fusion.threshold else "fake",
            }
        )
    return results
