"""Template face construction and similarity registration of abstract faces.

A face is aligned to the template by repeatedly solving the closed-form
least-squares similarity problem (unit-quaternion absolute orientation) and
keeping only the best-matching keypoints for the next round's estimate. The
depth column of the registered points is the 68-d depth feature vector.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError, ValidationError
from .geometry import NUM_KEYPOINTS, AbstractFace

COLLINEARITY_TOL = 1e-9


@dataclass(frozen=True)
class TemplateFace:
    """Canonical 68-point face: per-index averages of [x, y, d']."""

    points: np.ndarray  # (68, 3)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.shape != (NUM_KEYPOINTS, 3):
            raise ValidationError(f"template face needs shape (68, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("template face contains non-finite values")
        depths = pts[:, 2]
        scale = max(float(np.mean(np.abs(depths))), 1.0)
        if abs(float(depths.sum())) > 1e-6 * scale * NUM_KEYPOINTS:
            raise ValidationError("template depths must sum to zero")
        object.__setattr__(self, "points", pts)

    @property
    def depths(self) -> np.ndarray:
        return self.points[:, 2]


@dataclass(frozen=True)
class SimilarityTransform:
    """p -> s * R @ p + t with positive scale and a proper rotation."""

    s: float
    R: np.ndarray  # (3, 3)
    t: np.ndarray  # (3,)

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        t = np.asarray(self.t, dtype=float).reshape(3)
        if not self.s > 0:
            raise ValidationError(f"scale must be positive, got {self.s}")
        if R.shape != (3, 3) or np.abs(R.T @ R - np.eye(3)).max() > 1e-9:
            raise ValidationError("R is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValidationError("R is not a proper rotation")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return self.s * (pts @ self.R.T) + self.t

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(s=1.0, R=np.eye(3), t=np.zeros(3))


@dataclass(frozen=True)
class RegistrationConfig:
    rounds: int = 20
    trim_size: int = 20

    def __post_init__(self):
        if self.rounds < 1:
            raise ValidationError("rounds must be >= 1")
        if not 1 <= self.trim_size <= NUM_KEYPOINTS:
            raise ValidationError("trim_size must be in [1, 68]")


@dataclass(frozen=True)
class TfbdVector:
    """68 registered depth values, in keypoint-index order."""

    values: np.ndarray  # (68,)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.shape[0] != NUM_KEYPOINTS:
            raise ValidationError(f"feature vector must have {NUM_KEYPOINTS} entries, got {v.shape[0]}")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class RoundTrace:
    """What one registration round did; ``degenerate`` marks an early stop."""

    round_index: int
    transform: SimilarityTransform | None
    objective: float
    selected: tuple[int, ...]
    degenerate: bool = False


@dataclass(frozen=True)
class RegistrationResult:
    points: np.ndarray  # (68, 3) after the final round
    trace: tuple[RoundTrace, ...] = field(default_factory=tuple)

    @property
    def stopped_early(self) -> bool:
        return bool(self.trace) and self.trace[-1].degenerate


def _as_points(obj) -> np.ndarray:
    pts = obj.points if hasattr(obj, "points") else obj
    return np.asarray(pts, dtype=float)


def build_template(faces: list[AbstractFace]) -> TemplateFace:
    """Per-index arithmetic mean of [x, y, d'] over any number of faces."""
    if len(faces) == 0:
        raise ValidationError("cannot build a template from zero faces")
    stack = np.stack([_as_points(f) for f in faces], axis=0)  # (N, 68, 3)
    return TemplateFace(points=stack.mean(axis=0))


def solve_absolute_orientation(source: np.ndarray, target: np.ndarray) -> SimilarityTransform:
    """Closed-form similarity transform minimizing sum ||target - (s*R@src + t)||^2.

    The rotation comes from the unit quaternion that is the maximal-eigenvalue
    eigenvector of the symmetric 4x4 matrix built from the centered
    cross-covariance; scale and translation follow from the centered sums.

    Requires at least 3 non-collinear correspondences.
    """
    src = np.asarray(source, dtype=float)
    tgt = np.asarray(target, dtype=float)
    if src.shape != tgt.shape or src.ndim != 2 or src.shape[1] != 3:
        raise ValidationError(f"point sets must share shape (N, 3), got {src.shape} vs {tgt.shape}")
    n = src.shape[0]
    if n < 3:
        raise ValidationError(f"need at least 3 correspondences, got {n}")

    src_centroid = src.mean(axis=0)
    tgt_centroid = tgt.mean(axis=0)
    src_c = src - src_centroid
    tgt_c = tgt - tgt_centroid

    sv = np.linalg.svd(src_c, compute_uv=False)
    if sv[1] <= COLLINEARITY_TOL * max(sv[0], 1e-300):
        raise DegenerateGeometryError("source points are (near-)collinear; rotation is not determined")

    M = src_c.T @ tgt_c  # M[i, j] = sum_k src_c[k, i] * tgt_c[k, j]
    N = np.array(
        [
            [M[0, 0] + M[1, 1] + M[2, 2], M[1, 2] - M[2, 1], M[2, 0] - M[0, 2], M[0, 1] - M[1, 0]],
            [M[1, 2] - M[2, 1], M[0, 0] - M[1, 1] - M[2, 2], M[0, 1] + M[1, 0], M[0, 2] + M[2, 0]],
            [M[2, 0] - M[0, 2], M[0, 1] + M[1, 0], M[1, 1] - M[0, 0] - M[2, 2], M[1, 2] + M[2, 1]],
            [M[0, 1] - M[1, 0], M[0, 2] + M[2, 0], M[1, 2] + M[2, 1], M[2, 2] - M[0, 0] - M[1, 1]],
        ]
    )
    eigenvalues, eigenvectors = np.linalg.eigh(N)
    q = eigenvectors[:, np.argmax(eigenvalues)]  # (w, x, y, z); sign is irrelevant

    w, x, y, z = q
    R = np.array(
        [
            [w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (y * x + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x)],
            [2 * (z * x - w * y), 2 * (z * y + w * x), w * w - x * x - y * y + z * z],
        ]
    )

    denom = float((src_c * src_c).sum())
    s = float((tgt_c * (src_c @ R.T)).sum() / denom)
    if not s > 0:
        raise DegenerateGeometryError(f"recovered scale {s} is not positive")
    t = tgt_centroid - s * (R @ src_centroid)
    return SimilarityTransform(s=s, R=R, t=t)


def registration_errors(points, template, xf: SimilarityTransform) -> np.ndarray:
    """Per-point Euclidean distances between template points and the
    transformed points (pixel, pixel, depth axes mixed as-is)."""
    pts = _as_points(points)
    tpts = _as_points(template)
    if pts.shape != tpts.shape:
        raise ValidationError(f"point sets must share shape, got {pts.shape} vs {tpts.shape}")
    residual = tpts - xf.apply(pts)
    return np.sqrt((residual * residual).sum(axis=1))


def register_iterative(
    face: AbstractFace,
    template: TemplateFace,
    cfg: RegistrationConfig = RegistrationConfig(),
) -> RegistrationResult:
    """Align a face to the template over ``cfg.rounds`` rounds.

    Round 1 estimates the transform from all 68 correspondences; every later
    round re-estimates from the ``cfg.trim_size`` points whose current error
    is smallest (ties broken by keypoint index). Each round's transform is
    applied to all 68 evolving points. A degenerate trimmed subset stops the
    iteration early, keeping the previous round's points and flagging the
    trace.
    """
    points = _as_points(face).copy()
    tpts = _as_points(template)
    trace: list[RoundTrace] = []

    for round_index in range(1, cfg.rounds + 1):
        if round_index == 1:
            subset = np.arange(NUM_KEYPOINTS)
        else:
            errors = np.sqrt(((tpts - points) ** 2).sum(axis=1))
            subset = np.argsort(errors, kind="stable")[: cfg.trim_size]
        selected = tuple(int(i) for i in np.sort(subset))

        try:
            xf = solve_absolute_orientation(points[subset], tpts[subset])
        except (ValidationError, DegenerateGeometryError):
            objective = float(((tpts - points) ** 2).sum())
            trace.append(RoundTrace(round_index, None, objective, selected, degenerate=True))
            break

        points = xf.apply(points)
        objective = float(((tpts - points) ** 2).sum())
        trace.append(RoundTrace(round_index, xf, objective, selected))

    return RegistrationResult(points=points, trace=tuple(trace))


def extract_tfbd(registered_points: np.ndarray) -> TfbdVector:
    """Depth column of the registered 68-point set, keypoint order preserved."""
    pts = _as_points(registered_points)
    if pts.shape != (NUM_KEYPOINTS, 3):
        raise ValidationError(f"expected shape (68, 3), got {pts.shape}")
    return TfbdVector(values=pts[:, 2].copy())
