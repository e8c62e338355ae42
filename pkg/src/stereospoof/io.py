"""File formats: calibration, landmarks, persisted model components, images,
and the dense binary feature container.

All JSON is written with sorted keys and a trailing newline so identical
inputs yield byte-identical files. The feature container is little-endian:
a uint64 vector count, a uint64 dimension, then count*dim float64 values
row-major; a CSV mirror with full-precision decimal floats sits alongside
for debugging.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .classifier import FeatureScaler, FusionRule, SvmModel
from .codebook import AverageFace, Codebook
from .errors import ValidationError
from .geometry import NUM_KEYPOINTS, CameraIntrinsics, KeypointPair, StereoRig, compose_projection
from .registration import TemplateFace


def load_json(path: Path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"{path}: file not found") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def dump_json(path: Path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Calibration and landmarks


@dataclass(frozen=True)
class Calibration:
    rig: StereoRig
    unit: str


def load_calibration(path) -> Calibration:
    """`{"left": {fx,fy,cx,cy}, "right": {...}, "E": [9 row-major],
    "V": [3], "unit": "mm"}`"""
    path = Path(path)
    data = load_json(path)
    try:
        left = CameraIntrinsics(**{k: float(data["left"][k]) for k in ("fx", "fy", "cx", "cy")})
        right = CameraIntrinsics(**{k: float(data["right"][k]) for k in ("fx", "fy", "cx", "cy")})
        rotation = np.asarray(data["E"], dtype=float).reshape(3, 3)
        translation = np.asarray(data["V"], dtype=float).reshape(3)
        unit = str(data.get("unit", "mm"))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: malformed calibration ({exc!r})") from None
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    try:
        rig = compose_projection(left, right, rotation, translation)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    return Calibration(rig=rig, unit=unit)


def save_calibration(path, rig: StereoRig, unit: str = "mm") -> None:
    dump_json(
        path,
        {
            "left": {"fx": rig.left.fx, "fy": rig.left.fy, "cx": rig.left.cx, "cy": rig.left.cy},
            "right": {"fx": rig.right.fx, "fy": rig.right.fy, "cx": rig.right.cx, "cy": rig.right.cy},
            "E": [float(v) for v in rig.rotation.ravel()],
            "V": [float(v) for v in rig.translation],
            "unit": unit,
        },
    )


def load_landmarks(path) -> list[KeypointPair]:
    """`{"points": [{"i": 1..68, "ul", "vl", "ur", "vr"}, ...]}` with exactly
    68 entries."""
    path = Path(path)
    data = load_json(path)
    points = data.get("points")
    if not isinstance(points, list) or len(points) != NUM_KEYPOINTS:
        count = len(points) if isinstance(points, list) else "no"
        raise ValidationError(f"{path}: expected {NUM_KEYPOINTS} landmark points, got {count}")
    pairs = []
    for entry in points:
        try:
            pairs.append(
                KeypointPair(
                    index=int(entry["i"]),
                    u_l=float(entry["ul"]),
                    v_l=float(entry["vl"]),
                    u_r=float(entry["ur"]),
                    v_r=float(entry["vr"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path}: malformed landmark entry ({exc!r})") from None
    if sorted(p.index for p in pairs) != list(range(1, NUM_KEYPOINTS + 1)):
        raise ValidationError(f"{path}: landmark indices must be exactly 1..{NUM_KEYPOINTS}")
    return pairs


def save_landmarks(path, pairs: list[KeypointPair]) -> None:
    dump_json(
        path,
        {
            "points": [
                {"i": p.index, "ul": p.u_l, "vl": p.v_l, "ur": p.u_r, "vr": p.v_r}
                for p in sorted(pairs, key=lambda p: p.index)
            ]
        },
    )


# ---------------------------------------------------------------------------
# Model components


def save_template(path, template: TemplateFace) -> None:
    dump_json(path, {"points": [[float(v) for v in row] for row in template.points]})


def load_template(path) -> TemplateFace:
    data = load_json(Path(path))
    try:
        return TemplateFace(points=np.asarray(data["points"], dtype=float))
    except (KeyError, ValueError, ValidationError) as exc:
        raise ValidationError(f"{path}: bad template ({exc})") from None


def save_codebook(path, cb: Codebook) -> None:
    dump_json(
        path,
        {"k": cb.k, "words": [[float(v) for v in w] for w in cb.words], "seed": cb.seed},
    )


def load_codebook(path) -> Codebook:
    data = load_json(Path(path))
    try:
        cb = Codebook(words=np.asarray(data["words"], dtype=float), seed=int(data["seed"]))
    except (KeyError, ValueError, ValidationError) as exc:
        raise ValidationError(f"{path}: bad codebook ({exc})") from None
    if cb.k != int(data["k"]):
        raise ValidationError(f"{path}: declared k={data['k']} but {cb.k} words present")
    return cb


def save_average_face(path, avg: AverageFace) -> None:
    dump_json(
        path,
        {
            "class_tag": avg.class_tag,
            "count": avg.count,
            "codes": [[int(v) for v in row] for row in avg.codes],
        },
    )


def load_average_face(path) -> AverageFace:
    data = load_json(Path(path))
    try:
        return AverageFace(
            codes=np.asarray(data["codes"], dtype=np.uint8),
            class_tag=str(data["class_tag"]),
            count=int(data["count"]),
        )
    except (KeyError, ValueError, ValidationError) as exc:
        raise ValidationError(f"{path}: bad average face ({exc})") from None


def save_svm(path, model: SvmModel) -> None:
    dump_json(
        path,
        {
            "kernel": "rbf",
            "gamma": model.gamma,
            "C": model.C,
            "bias": model.bias,
            "dim": model.dim,
            "support_vectors": [[float(v) for v in sv] for sv in model.support_vectors],
            "dual_coef": [float(v) for v in model.dual_coef],
        },
    )


def load_svm(path) -> SvmModel:
    data = load_json(Path(path))
    if data.get("kernel") != "rbf":
        raise ValidationError(f"{path}: unsupported kernel {data.get('kernel')!r}")
    try:
        return SvmModel(
            support_vectors=np.asarray(data["support_vectors"], dtype=float),
            dual_coef=np.asarray(data["dual_coef"], dtype=float),
            bias=float(data["bias"]),
            gamma=float(data["gamma"]),
            C=float(data["C"]),
            dim=int(data["dim"]),
        )
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"{path}: bad SVM model ({exc!r})") from None


def save_scaler(path, scaler: FeatureScaler) -> None:
    dump_json(
        path,
        {"mean": [float(v) for v in scaler.mean], "std": [float(v) for v in scaler.std]},
    )


def load_scaler(path) -> FeatureScaler:
    data = load_json(Path(path))
    try:
        return FeatureScaler(
            mean=np.asarray(data["mean"], dtype=float), std=np.asarray(data["std"], dtype=float)
        )
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"{path}: bad scaler ({exc!r})") from None


def save_fusion(path, rule: FusionRule) -> None:
    dump_json(path, {"weights": list(rule.weights), "threshold": rule.threshold})


def load_fusion(path) -> FusionRule:
    data = load_json(Path(path))
    try:
        return FusionRule(weights=tuple(data["weights"]), threshold=float(data["threshold"]))
    except (KeyError, ValueError, ValidationError) as exc:
        raise ValidationError(f"{path}: bad fusion rule ({exc})") from None


# ---------------------------------------------------------------------------
# Feature container


def write_features(path, X: np.ndarray) -> None:
    """Binary container plus a CSV mirror next to it (same stem)."""
    X = np.ascontiguousarray(np.asarray(X, dtype="<f8"))
    if X.ndim != 2:
        raise ValidationError(f"features must be 2-d, got shape {X.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(np.uint64(X.shape[0]).tobytes())
        fh.write(np.uint64(X.shape[1]).tobytes())
        fh.write(X.tobytes())
    np.savetxt(path.with_suffix(".csv"), X, fmt="%.17g", delimiter=",")


def read_features(path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as fh:
        header = np.frombuffer(fh.read(16), dtype="<u8")
        if header.size != 2:
            raise ValidationError(f"{path}: truncated feature container")
        count, dim = int(header[0]), int(header[1])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != count * dim:
        raise ValidationError(f"{path}: expected {count * dim} values, found {data.size}")
    return data.reshape(count, dim)


# ---------------------------------------------------------------------------
# Images


def read_image(path) -> np.ndarray:
    """8-bit grayscale (H, W) or RGB (H, W, 3) array from a PNG/PGM file."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"{path}: file not found")
    with Image.open(path) as img:
        if img.mode == "L":
            return np.asarray(img, dtype=np.uint8)
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def write_image(path, pixels: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(pixels, dtype=np.uint8)).save(path)
