"""Visual-word codebook over 3-channel LBP label vectors, per-pixel coding,
and per-class average code faces.

Training is plain Lloyd k-means with k-means++ seeding, deterministic for a
fixed (seed, sample order). The assignment step runs on the shared nearest-
centroid kernel; centroid updates stay in numpy so results do not depend on
the acceleration mode.
"""

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._kernels import nearest_centroid3
from .errors import ValidationError
from .texture import CROP_HEIGHT, CROP_WIDTH, MslbpFeatureFace

CODEBOOK_SIZE = 256

CLASS_TAGS = ("positive", "negative")  # positive = live, negative = fake


@dataclass(frozen=True)
class Codebook:
    """k centroids in the 3-d label space (k=256 in the trained pipeline)."""

    words: np.ndarray  # (k, 3) float64
    seed: int
    inertia_trace: tuple[float, ...] = ()
    history: tuple[np.ndarray, ...] = field(default=(), repr=False)

    def __post_init__(self):
        words = np.asarray(self.words, dtype=np.float64)
        if words.ndim != 2 or words.shape[1] != 3 or words.shape[0] < 1:
            raise ValidationError(f"codebook words must be (k, 3), got {words.shape}")
        if not np.all(np.isfinite(words)):
            raise ValidationError("codebook contains non-finite words")
        object.__setattr__(self, "words", words)

    @property
    def k(self) -> int:
        return self.words.shape[0]


@dataclass(frozen=True)
class BovwCodeFace:
    """Per-pixel nearest-codeword indices over the 64x72 crop."""

    codes: np.ndarray  # (72, 64) uint8

    def __post_init__(self):
        codes = np.asarray(self.codes)
        if codes.shape != (CROP_HEIGHT, CROP_WIDTH):
            raise ValidationError(f"code face must be {CROP_HEIGHT}x{CROP_WIDTH}, got {codes.shape}")
        if codes.dtype != np.uint8:
            codes = codes.astype(np.uint8, casting="safe")
        object.__setattr__(self, "codes", codes)


@dataclass(frozen=True)
class AverageFace:
    """Per-pixel rounded mean of one class's code faces."""

    codes: np.ndarray  # (72, 64) uint8
    class_tag: str
    count: int

    def __post_init__(self):
        codes = np.asarray(self.codes)
        if codes.shape != (CROP_HEIGHT, CROP_WIDTH) or codes.dtype != np.uint8:
            raise ValidationError("average face must be uint8 with shape (72, 64)")
        if self.class_tag not in CLASS_TAGS:
            raise ValidationError(f"class_tag must be one of {CLASS_TAGS}, got {self.class_tag!r}")
        if self.count < 1:
            raise ValidationError("average face needs a positive source count")
        object.__setattr__(self, "codes", codes)


def train_codebook(
    samples: np.ndarray,
    k: int = CODEBOOK_SIZE,
    seed: int = 0,
    max_iters: int = 100,
    record_history: bool = False,
) -> Codebook:
    """Cluster 3-d label vectors into k visual words.

    k-means++ initialization from ``seed``, then Lloyd iterations until the
    assignment reaches a fixpoint or ``max_iters``. Clusters that empty out
    are re-seeded to the not-yet-used point farthest from its assigned
    centroid. The recorded inertia trace (within-cluster sum of squares at
    each assignment step) is non-increasing.
    """
    pts = np.ascontiguousarray(np.asarray(samples, dtype=np.float64))
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValidationError(f"samples must be (n, 3), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValidationError("samples contain non-finite values")
    n = pts.shape[0]
    if np.unique(pts, axis=0).shape[0] < k:
        raise ValidationError(f"need at least {k} distinct samples, got fewer")

    rng = np.random.default_rng(seed)

    # k-means++ seeding: d2-weighted draws never repeat an exact centroid
    centroids = np.empty((k, 3), dtype=np.float64)
    centroids[0] = pts[rng.integers(n)]
    _, d2 = nearest_centroid3(pts, centroids[:1])
    for i in range(1, k):
        centroids[i] = pts[rng.choice(n, p=d2 / d2.sum())]
        _, d2_new = nearest_centroid3(pts, centroids[i : i + 1])
        d2 = np.minimum(d2, d2_new)

    inertia_trace: list[float] = []
    history: list[np.ndarray] = []
    prev_labels = None
    for _ in range(max_iters):
        labels, dists = nearest_centroid3(pts, centroids)
        inertia_trace.append(float(dists.sum()))
        if record_history:
            history.append(centroids.copy())
        if prev_labels is not None and np.array_equal(labels, prev_labels):
            break
        prev_labels = labels

        counts = np.bincount(labels, minlength=k)
        new_centroids = np.empty_like(centroids)
        for dim in range(3):
            sums = np.bincount(labels, weights=pts[:, dim], minlength=k)
            new_centroids[:, dim] = np.divide(
                sums, counts, out=centroids[:, dim].copy(), where=counts > 0
            )

        empties = np.flatnonzero(counts == 0)
        if empties.size:
            # farthest-first re-seed, ties broken by sample index
            order = np.argsort(-dists, kind="stable")
            for c, idx in zip(empties, order[: empties.size]):
                new_centroids[c] = pts[idx]
        centroids = new_centroids

    return Codebook(
        words=centroids,
        seed=seed,
        inertia_trace=tuple(inertia_trace),
        history=tuple(history),
    )


def encode_bovw(face: MslbpFeatureFace, cb: Codebook) -> BovwCodeFace:
    """Map every pixel's 3-channel label vector to its squared-Euclidean
    nearest codeword (lowest index on ties)."""
    labels, _ = nearest_centroid3(face.vectors(), cb.words)
    return BovwCodeFace(codes=labels.reshape(CROP_HEIGHT, CROP_WIDTH).astype(np.uint8))


def build_average_face(faces: Sequence[BovwCodeFace], classes: Sequence[str]) -> AverageFace:
    """Per-pixel mean of same-class code faces, rounded half away from zero."""
    if len(faces) == 0:
        raise ValidationError("cannot average zero code faces")
    if len(faces) != len(classes):
        raise ValidationError("faces and class tags differ in length")
    tags = set(classes)
    if len(tags) != 1:
        raise ValidationError(f"mixed-class input: {sorted(tags)}")

    stack = np.stack([f.codes for f in faces], axis=0).astype(np.float64)
    mean = stack.mean(axis=0)
    rounded = np.floor(mean + 0.5)  # codes are nonnegative: floor(x+0.5) is half-away-from-zero
    return AverageFace(codes=rounded.astype(np.uint8), class_tag=classes[0], count=len(faces))
