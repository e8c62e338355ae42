"""Face-region cropping and the three-scale uniform-LBP feature face.

Conventions (fixed here, relied on by the codebook):

* crop: bounding box expanded by ``expansion`` about its center, clipped to
  the image, grayscaled with ITU-R 601 luma weights, bilinearly resized to
  64x72 using half-pixel sample centers;
* LBP: neighbor ``k`` of ``P`` sits at angle ``2*pi*k/P`` counterclockwise
  (y axis points down, so angle 0 is to the right, angle 90 deg is up) and is
  bit ``k`` (LSB first); samples use bilinear interpolation with replicate
  padding at the border; a tie ``neighbor == center`` produces bit 1;
* uniform labels are assigned to uniform patterns in ascending raw-value
  order, with all non-uniform patterns sharing the final label.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._kernels import lbp_label_map
from .errors import ValidationError

CROP_WIDTH = 64
CROP_HEIGHT = 72

SUPPORTED_LBP = ((8, 1), (8, 2), (16, 2))

DEFAULT_EXPANSION = 1.3


@dataclass(frozen=True)
class Rect:
    """Axis-aligned box in pixel coordinates, x0 < x1 and y0 < y1."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValidationError(f"empty rectangle: {self}")

    @classmethod
    def bounding(cls, xs, ys) -> "Rect":
        return cls(float(np.min(xs)), float(np.min(ys)), float(np.max(xs)), float(np.max(ys)))

    def expanded(self, factor: float) -> "Rect":
        cx = 0.5 * (self.x0 + self.x1)
        cy = 0.5 * (self.y0 + self.y1)
        hw = 0.5 * (self.x1 - self.x0) * factor
        hh = 0.5 * (self.y1 - self.y0) * factor
        return Rect(cx - hw, cy - hh, cx + hw, cy + hh)


@dataclass(frozen=True)
class FaceCrop:
    """64x72 8-bit grayscale face region (height 72 rows, width 64 columns)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.shape != (CROP_HEIGHT, CROP_WIDTH):
            raise ValidationError(f"face crop must be {CROP_HEIGHT}x{CROP_WIDTH}, got {px.shape}")
        if px.dtype != np.uint8:
            raise ValidationError(f"face crop must be uint8, got {px.dtype}")
        object.__setattr__(self, "pixels", px)


@dataclass(frozen=True)
class UniformMapping:
    """Raw LBP pattern -> label table for one neighbor count P."""

    P: int
    table: np.ndarray  # (2**P,) uint8

    @property
    def n_labels(self) -> int:
        return self.P * (self.P - 1) + 3

    @property
    def nonuniform_label(self) -> int:
        return self.P * (self.P - 1) + 2


@dataclass(frozen=True)
class MslbpFeatureFace:
    """Per-pixel labels at scales (8,1), (8,2), (16,2), stacked channelwise."""

    labels: np.ndarray  # (72, 64, 3) uint8

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.shape != (CROP_HEIGHT, CROP_WIDTH, 3) or lab.dtype != np.uint8:
            raise ValidationError("feature face must be uint8 with shape (72, 64, 3)")
        if lab[:, :, :2].max() >= 59 or lab[:, :, 2].max() >= 243:
            raise ValidationError("labels exceed the uniform-pattern ranges")
        object.__setattr__(self, "labels", lab)

    def vectors(self) -> np.ndarray:
        """All pixels as (4608, 3) float64 label vectors, row-major."""
        return self.labels.reshape(-1, 3).astype(np.float64)


@lru_cache(maxsize=None)
def build_uniform_mapping(P: int) -> UniformMapping:
    """Label table over all 2**P raw patterns.

    A pattern is uniform when its circular bit string has at most two 0/1
    transitions; there are P*(P-1)+2 of them.
    """
    raws = np.arange(2**P, dtype=np.uint32)
    rotated = ((raws << 1) | (raws >> (P - 1))) & ((1 << P) - 1)
    transitions = np.bitwise_count(raws ^ rotated)
    uniform = transitions <= 2

    expected = P * (P - 1) + 2
    assert int(uniform.sum()) == expected, "uniform pattern count mismatch"

    table = np.full(2**P, expected, dtype=np.uint8)  # non-uniform label
    table[uniform] = np.arange(expected, dtype=np.uint8)  # ascending raw order
    return UniformMapping(P=P, table=table)


@lru_cache(maxsize=None)
def circle_offsets(P: int, R: float) -> tuple[np.ndarray, np.ndarray]:
    """(dx, dy) sampling offsets; near-integer values are snapped so that
    axis-aligned neighbors land exactly on pixel centers."""
    angles = 2.0 * np.pi * np.arange(P) / P
    off_x = R * np.cos(angles)
    off_y = -R * np.sin(angles)
    for a in (off_x, off_y):
        near = np.abs(a - np.round(a)) < 1e-9
        a[near] = np.round(a[near])
    off_x.flags.writeable = False
    off_y.flags.writeable = False
    return off_x, off_y


def _to_gray_f64(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image)
    if img.ndim == 2:
        return img.astype(np.float64)
    if img.ndim == 3 and img.shape[2] == 3:
        r, g, b = img[:, :, 0], img[:, :, 1], img[:, :, 2]
        return 0.299 * r + 0.587 * g + 0.114 * b
    raise ValidationError(f"expected a gray or RGB image, got shape {img.shape}")


def _resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    in_h, in_w = img.shape
    sy = np.clip((np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5, 0.0, in_h - 1.0)
    sx = np.clip((np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5, 0.0, in_w - 1.0)
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (sy - y0)[:, None]
    fx = (sx - x0)[None, :]
    v00 = img[y0[:, None], x0[None, :]]
    v01 = img[y0[:, None], x1[None, :]]
    v10 = img[y1[:, None], x0[None, :]]
    v11 = img[y1[:, None], x1[None, :]]
    return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11)


def crop_and_normalize(image: np.ndarray, bbox: Rect, expansion: float = DEFAULT_EXPANSION) -> FaceCrop:
    """Expand the face box, clip it to the image, and resample the region to
    the canonical 64x72 grayscale crop."""
    gray = _to_gray_f64(image)
    height, width = gray.shape

    box = bbox.expanded(expansion)
    x0 = max(int(np.floor(box.x0)), 0)
    y0 = max(int(np.floor(box.y0)), 0)
    x1 = min(int(np.ceil(box.x1)), width)
    y1 = min(int(np.ceil(box.y1)), height)
    if x1 <= x0 or y1 <= y0:
        raise ValidationError(f"face box {box} lies outside the {width}x{height} image")

    region = gray[y0:y1, x0:x1]
    resized = _resize_bilinear(region, CROP_HEIGHT, CROP_WIDTH)
    return FaceCrop(pixels=np.clip(np.rint(resized), 0, 255).astype(np.uint8))


def lbp_uniform(crop: FaceCrop | np.ndarray, P: int, R: float) -> np.ndarray:
    """Uniform-LBP label map of the crop at one (P, R) scale."""
    if (P, R) not in SUPPORTED_LBP:
        raise ValidationError(f"unsupported LBP scale (P={P}, R={R}); supported: {SUPPORTED_LBP}")
    pixels = crop.pixels if isinstance(crop, FaceCrop) else np.asarray(crop)
    off_x, off_y = circle_offsets(P, float(R))
    mapping = build_uniform_mapping(P)
    return lbp_label_map(pixels.astype(np.float64), off_x, off_y, mapping.table)


def mslbp_face(crop: FaceCrop) -> MslbpFeatureFace:
    """Stack the three LBP label maps into the per-pixel 3-channel feature face."""
    channels = [lbp_uniform(crop, P, R) for P, R in SUPPORTED_LBP]
    return MslbpFeatureFace(labels=np.stack(channels, axis=-1))
