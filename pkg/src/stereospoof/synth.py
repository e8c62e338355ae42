"""Synthetic stereo-face generator for desk-scale verification.

Live samples pose a fixed curved 68-point face shape with a random similarity
transform and project it through the rig into both images; fake samples use
the same shape flattened onto its best-fit plane (a photo held in space).
Right images carry class-distinct procedural textures: band-limited noise for
live faces, a low-passed, posterized, halftone-dotted field for fakes.
Ground-truth depths are written next to the landmarks so geometry oracles can
check the round trip.

All randomness flows from the config seed through per-sample
``SeedSequence(seed, spawn_key=(split, class, index))`` streams, so any
sample is reproducible in isolation.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .geometry import NUM_KEYPOINTS, CameraIntrinsics, KeypointPair, StereoRig, compose_projection
from .io import dump_json, save_calibration, save_landmarks, write_image

SPLITS = ("template", "train", "average", "test")
LABELS = ("live", "fake")


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_template: int = 20
    n_train_per_class: int = 200
    n_average_per_class: int = 100
    n_test_per_class: int = 200
    image_width: int = 640
    image_height: int = 480
    focal: float = 500.0
    baseline: float = 60.0  # mm, along +x
    landmark_noise_sigma: float = 0.05  # pixels
    depth_noise_sigma: float = 0.5  # mm, along the local depth axis
    live_band: tuple[float, float] = (0.06, 0.45)  # cycles/pixel
    fake_band: tuple[float, float] = (0.005, 0.06)
    fake_posterize_levels: int = 12
    fake_dot_period: int = 6
    fake_dot_amplitude: float = 12.0
    image_format: str = "pgm"
    max_pose_retries: int = 100

    def __post_init__(self):
        if self.landmark_noise_sigma < 0 or self.depth_noise_sigma < 0:
            raise ValidationError("noise sigmas must be nonnegative")
        if self.image_format not in ("pgm", "png"):
            raise ValidationError(f"image_format must be pgm or png, got {self.image_format!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown synth config keys: {sorted(unknown)}")
        cfg = cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})
        return cfg


def default_rig(cfg: SynthConfig) -> StereoRig:
    intr = CameraIntrinsics(
        fx=cfg.focal, fy=cfg.focal, cx=cfg.image_width / 2.0, cy=cfg.image_height / 2.0
    )
    return compose_projection(intr, intr, np.eye(3), np.array([cfg.baseline, 0.0, 0.0]))


def face_shape() -> np.ndarray:
    """Canonical curved face: 68 points in mm, x right, y down, z toward the
    camera as negative relief over the z=0 plane."""
    pts: list[tuple[float, float]] = []
    t = np.linspace(0.0, 1.0, 17)  # jaw: ear -> chin -> ear
    pts += [(-78 * math.cos(ti * math.pi), 18 + 72 * math.sin(ti * math.pi)) for ti in t]
    for side in (-1.0, 1.0):  # eyebrows
        xs = np.linspace(16, 56, 5) * side
        pts += [(x, -46 - 6 * math.sin(i / 4 * math.pi)) for i, x in enumerate(xs)]
    pts += [(0.0, y) for y in np.linspace(-28, 8, 4)]  # nose bridge
    pts += [(x, 18.0) for x in np.linspace(-14, 14, 5)]  # nostril line
    for cx in (-34.0, 34.0):  # eyes
        ang = np.linspace(0, 2 * math.pi, 6, endpoint=False)
        pts += [(cx + 13 * math.cos(a), -28 - 5 * math.sin(a)) for a in ang]
    ang = np.linspace(0, 2 * math.pi, 12, endpoint=False)  # outer mouth
    pts += [(26 * math.cos(a), 48 - 10 * math.sin(a)) for a in ang]
    ang = np.linspace(0, 2 * math.pi, 8, endpoint=False)  # inner mouth
    pts += [(16 * math.cos(a), 48 - 4 * math.sin(a)) for a in ang]

    xy = np.asarray(pts)
    x, y = xy[:, 0], xy[:, 1]
    dome = 65.0 * np.sqrt(np.maximum(0.0, 1 - (x / 85.0) ** 2 - ((y - 8) / 105.0) ** 2))
    nose = 40.0 * np.exp(-((x / 15.0) ** 2 + ((y - 10) / 22.0) ** 2))
    return np.column_stack([x, y, -(dome + nose)])


def flatten_to_plane(points: np.ndarray) -> np.ndarray:
    """Project points onto their best-fit plane (zero residual variance)."""
    pts = np.asarray(points, dtype=float)
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    normal = vt[2]
    return pts - np.outer(centered @ normal, normal)


def _euler_rotation(pitch: float, yaw: float, roll: float) -> np.ndarray:
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    cr, sr = math.cos(roll), math.sin(roll)
    rx = np.array([[1, 0, 0], [0, cp, -sp], [0, sp, cp]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cr, -sr, 0], [sr, cr, 0], [0, 0, 1]])
    return rz @ ry @ rx


def _sample_pose(rng: np.random.Generator, frontal: bool):
    if frontal:
        angles = np.clip(rng.normal(0.0, 0.5, 3), -1.5, 1.5)
        scale = 1.0 + rng.uniform(-0.01, 0.01)
        t = np.array([rng.uniform(-10, 10), rng.uniform(-10, 10), 650.0 + rng.uniform(-15, 15)])
    else:
        angles = np.clip(rng.normal(0.0, 6.0, 3), -15.0, 15.0)
        scale = rng.uniform(0.92, 1.08)
        t = np.array([rng.uniform(-110, 110), rng.uniform(-70, 70), rng.uniform(570, 730)])
    R = _euler_rotation(*np.deg2rad(angles))
    return scale, R, t


def _project(rig: StereoRig, points_right_frame: np.ndarray):
    """Pixel coordinates of right-frame points in both cameras."""
    p = points_right_frame
    right = np.column_stack(
        [
            rig.right.fx * p[:, 0] / p[:, 2] + rig.right.cx,
            rig.right.fy * p[:, 1] / p[:, 2] + rig.right.cy,
        ]
    )
    q = p @ rig.rotation.T + rig.translation
    left = np.column_stack(
        [
            rig.left.fx * q[:, 0] / q[:, 2] + rig.left.cx,
            rig.left.fy * q[:, 1] / q[:, 2] + rig.left.cy,
        ]
    )
    return left, right


def band_limited_noise(
    height: int, width: int, rng: np.random.Generator, low: float, high: float
) -> np.ndarray:
    """Gray texture whose spatial frequencies (cycles/pixel) lie in
    [low, high], normalized to mean 128 / std 42."""
    white = rng.standard_normal((height, width))
    spectrum = np.fft.rfft2(white)
    fy = np.fft.fftfreq(height)[:, None]
    fx = np.fft.rfftfreq(width)[None, :]
    radius = np.sqrt(fx * fx + fy * fy)
    spectrum *= (radius >= low) & (radius <= high)
    img = np.fft.irfft2(spectrum, s=(height, width))
    std = img.std()
    if std > 0:
        img = (img - img.mean()) / std
    return np.clip(128.0 + 42.0 * img, 0, 255).astype(np.uint8)


def _fake_texture(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Print-attack look: low-pass field, posterized, with a halftone grid."""
    base = band_limited_noise(
        cfg.image_height, cfg.image_width, rng, cfg.fake_band[0], cfg.fake_band[1]
    ).astype(np.float64)
    step = 256.0 / cfg.fake_posterize_levels
    base = np.floor(base / step) * step + step / 2.0
    ys = np.arange(cfg.image_height)[:, None]
    xs = np.arange(cfg.image_width)[None, :]
    grid = np.sin(2 * np.pi * xs / cfg.fake_dot_period) * np.sin(2 * np.pi * ys / cfg.fake_dot_period)
    base += cfg.fake_dot_amplitude * np.sign(grid)
    return np.clip(base, 0, 255).astype(np.uint8)


def _live_texture(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    return band_limited_noise(
        cfg.image_height, cfg.image_width, rng, cfg.live_band[0], cfg.live_band[1]
    )


@dataclass(frozen=True)
class SynthSample:
    keypoints: list[KeypointPair]
    right_image: np.ndarray
    left_image: np.ndarray
    gt_depths: np.ndarray  # (68,) true right-frame depths, before pixel noise
    flat: bool
    pose: dict = field(default_factory=dict)


def make_sample(
    cfg: SynthConfig,
    rig: StereoRig,
    rng: np.random.Generator,
    flat: bool,
    frontal: bool = False,
) -> SynthSample:
    """One posed, projected, textured stereo sample."""
    shape = face_shape()
    if flat:
        shape = flatten_to_plane(shape)
    if cfg.depth_noise_sigma > 0:
        shape = shape.copy()
        shape[:, 2] += rng.normal(0.0, cfg.depth_noise_sigma, NUM_KEYPOINTS)

    margin = 5.0
    for _ in range(cfg.max_pose_retries):
        scale, R, t = _sample_pose(rng, frontal)
        world = scale * (shape @ R.T) + t
        if world[:, 2].min() <= 1.0:
            continue
        left, right = _project(rig, world)
        if cfg.landmark_noise_sigma > 0:
            left = left + rng.normal(0.0, cfg.landmark_noise_sigma, left.shape)
            right = right + rng.normal(0.0, cfg.landmark_noise_sigma, right.shape)
        coords = np.vstack([left, right])
        if (
            coords[:, 0].min() >= margin
            and coords[:, 0].max() <= cfg.image_width - margin
            and coords[:, 1].min() >= margin
            and coords[:, 1].max() <= cfg.image_height - margin
        ):
            break
    else:
        raise ValidationError(
            f"no in-frame pose found after {cfg.max_pose_retries} retries; loosen the pose ranges"
        )

    texture = _fake_texture(cfg, rng) if flat else _live_texture(cfg, rng)
    left_image = np.roll(texture, int(round(rig.translation[0] / 4.0)), axis=1)

    keypoints = [
        KeypointPair(
            index=i + 1,
            u_l=float(left[i, 0]),
            v_l=float(left[i, 1]),
            u_r=float(right[i, 0]),
            v_r=float(right[i, 1]),
        )
        for i in range(NUM_KEYPOINTS)
    ]
    pose = {
        "scale": float(scale),
        "rotation": [float(v) for v in R.ravel()],
        "translation": [float(v) for v in t],
    }
    return SynthSample(
        keypoints=keypoints,
        right_image=texture,
        left_image=left_image,
        gt_depths=world[:, 2].copy(),
        flat=flat,
        pose=pose,
    )


def _sample_plan(cfg: SynthConfig):
    plan = [("template", "live", i, True) for i in range(cfg.n_template)]
    counts = {
        "train": cfg.n_train_per_class,
        "average": cfg.n_average_per_class,
        "test": cfg.n_test_per_class,
    }
    for split, count in counts.items():
        for label in LABELS:
            plan += [(split, label, i, False) for i in range(count)]
    return plan


def synth_generate(cfg: SynthConfig, out_dir) -> Path:
    """Write images, landmark files, ground truth, calibration, and the
    manifest under ``out_dir``; returns the manifest path."""
    out_dir = Path(out_dir)
    rig = default_rig(cfg)
    save_calibration(out_dir / "calibration.json", rig, unit="mm")

    entries = []
    for split, label, idx, frontal in _sample_plan(cfg):
        split_key = SPLITS.index(split)
        label_key = LABELS.index(label)
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=cfg.seed, spawn_key=(split_key, label_key, idx))
        )
        sample = make_sample(cfg, rig, rng, flat=(label == "fake"), frontal=frontal)

        sample_id = f"{label}_{split}_{idx:04d}"
        ext = cfg.image_format
        right_rel = f"images/{sample_id}_right.{ext}"
        left_rel = f"images/{sample_id}_left.{ext}"
        lm_rel = f"landmarks/{sample_id}.json"
        write_image(out_dir / right_rel, sample.right_image)
        write_image(out_dir / left_rel, sample.left_image)
        save_landmarks(out_dir / lm_rel, sample.keypoints)
        dump_json(
            out_dir / f"gt/{sample_id}.json",
            {
                "depths": [float(v) for v in sample.gt_depths],
                "normalized_depths": [float(v) for v in sample.gt_depths - sample.gt_depths.mean()],
                "flat": sample.flat,
                "pose": sample.pose,
            },
        )
        entries.append(
            {"left": left_rel, "right": right_rel, "landmarks": lm_rel, "label": label, "split": split}
        )

    manifest_path = out_dir / "manifest.json"
    dump_json(manifest_path, entries)
    return manifest_path
