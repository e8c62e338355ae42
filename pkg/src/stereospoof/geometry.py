"""Stereo pinhole geometry: projection composition, per-keypoint depth,
depth normalization, and abstract keypoint faces.

Depth values live in the right-camera frame and carry whatever length unit
the calibration uses (millimeters recommended); nothing here converts units.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError, ValidationError

NUM_KEYPOINTS = 68

ROTATION_TOL = 1e-9
DEGENERACY_TOL = 1e-12


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics: focal lengths and principal point, in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class KeypointPair:
    """One facial keypoint seen in both images (pixel coordinates)."""

    index: int  # 1..68
    u_l: float
    v_l: float
    u_r: float
    v_r: float


@dataclass(frozen=True)
class StereoRig:
    """Calibrated two-camera rig.

    ``rotation``/``translation`` map right-camera coordinates into the
    left-camera frame; ``projection`` is the composed 3x4 matrix that takes
    homogeneous right-frame points to left-image pixels.
    """

    left: CameraIntrinsics
    right: CameraIntrinsics
    rotation: np.ndarray  # (3, 3)
    translation: np.ndarray  # (3,)
    projection: np.ndarray = field(init=False)  # (3, 4)

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if R.shape != (3, 3):
            raise ValidationError(f"rotation must be 3x3, got {R.shape}")
        if np.abs(R.T @ R - np.eye(3)).max() > ROTATION_TOL:
            raise ValidationError("rotation matrix is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > ROTATION_TOL:
            raise ValidationError("rotation matrix determinant is not +1 (improper rotation)")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "projection", self.left.matrix() @ np.hstack([R, t[:, None]]))


@dataclass(frozen=True)
class AbstractFace:
    """68 keypoints as [x, y, d'] rows: right-image pixels plus normalized
    (zero-mean) depth."""

    points: np.ndarray  # (68, 3)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.shape != (NUM_KEYPOINTS, 3):
            raise ValidationError(f"abstract face needs shape (68, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("abstract face contains non-finite values")
        depths = pts[:, 2]
        scale = max(float(np.mean(np.abs(depths))), 1.0)
        if abs(float(depths.sum())) > 1e-6 * scale * NUM_KEYPOINTS:
            raise ValidationError("normalized depths must sum to zero")
        object.__setattr__(self, "points", pts)

    @property
    def depths(self) -> np.ndarray:
        return self.points[:, 2]


def compose_projection(
    left: CameraIntrinsics,
    right: CameraIntrinsics,
    rotation: np.ndarray,
    translation: np.ndarray,
) -> StereoRig:
    """Build a :class:`StereoRig`, validating the rotation and composing the
    left-intrinsics-times-extrinsics 3x4 projection."""
    return StereoRig(left=left, right=right, rotation=rotation, translation=translation)


def triangulate_depth(rig: StereoRig, kp: KeypointPair) -> float:
    """Depth of one keypoint in the right-camera frame.

    The right pixel fixes a ray ``d * [(u_r-cx)/fx, (v_r-cy)/fy, 1]``; the two
    left-image projection equations are combined to eliminate the y-ray
    component, leaving depth as a closed-form ratio that only involves the
    x-component of the right ray.

    Raises
    ------
    DegenerateGeometryError
        When the denominator vanishes relative to the numerator (parallel
        rays, e.g. zero disparity on a rectified rig).
    """
    m = rig.projection
    B1 = m[0, :3] - m[2, :3] * kp.u_l
    B2 = m[1, :3] - m[2, :3] * kp.v_l
    b1 = m[2, 3] * kp.u_l - m[0, 3]
    b2 = m[2, 3] * kp.v_l - m[1, 3]
    ray_x = (kp.u_r - rig.right.cx) / rig.right.fx

    numerator = B1[1] * b2 - B2[1] * b1
    denominator = ray_x * (B1[1] * B2[0] - B1[0] * B2[1]) + (B1[1] * B2[2] - B2[1] * B1[2])

    if abs(denominator) <= DEGENERACY_TOL * abs(numerator):
        raise DegenerateGeometryError(
            f"keypoint {kp.index}: depth denominator {denominator:.3e} is degenerate "
            f"relative to numerator {numerator:.3e}"
        )
    return float(numerator / denominator)


def normalize_depths(depths: np.ndarray) -> np.ndarray:
    """Subtract the mean over the 68 depths, making the vector zero-mean."""
    d = np.asarray(depths, dtype=float).reshape(-1)
    if d.shape[0] != NUM_KEYPOINTS:
        raise ValidationError(f"expected {NUM_KEYPOINTS} depths, got {d.shape[0]}")
    if not np.all(np.isfinite(d)):
        raise ValidationError("depths contain non-finite values")
    return d - d.mean()


def build_abstract_face(rig: StereoRig, keypoints: list[KeypointPair]) -> AbstractFace:
    """Triangulate all 68 keypoints and assemble [u_r, v_r, d'] rows in
    keypoint-index order."""
    if len(keypoints) != NUM_KEYPOINTS:
        raise ValidationError(f"expected {NUM_KEYPOINTS} keypoints, got {len(keypoints)}")
    indices = sorted(kp.index for kp in keypoints)
    if indices != list(range(1, NUM_KEYPOINTS + 1)):
        raise ValidationError("keypoint indices must be exactly 1..68 with no duplicates")

    ordered = sorted(keypoints, key=lambda kp: kp.index)
    depths = np.empty(NUM_KEYPOINTS)
    for row, kp in enumerate(ordered):
        try:
            depths[row] = triangulate_depth(rig, kp)
        except DegenerateGeometryError as exc:
            raise DegenerateGeometryError(f"triangulation failed: {exc}") from exc

    points = np.column_stack(
        [
            [kp.u_r for kp in ordered],
            [kp.v_r for kp in ordered],
            normalize_depths(depths),
        ]
    )
    return AbstractFace(points=points)
