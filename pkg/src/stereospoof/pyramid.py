"""Two-level spatial pyramid over code faces: weighted normalized code
histograms, matching-degree vectors against the class average faces, and the
3328-d micro-texture descriptor.

Block layout of the assembled vector (13 blocks x 256 bins = 3328):

    [0]      level-0 histogram of the whole face, weight 1/2
    [1..4]   level-1 histograms of quadrants q1..q4 (row-major: top-left,
             top-right, bottom-left, bottom-right), weight 1 each
    [5..8]   matching-degree vectors of q1..q4 against the positive average
    [9..12]  matching-degree vectors of q1..q4 against the negative average

Every block is L1-normalized to its weight, so the total mass is 12.5.
"""

from dataclasses import dataclass

import numpy as np

from .codebook import CODEBOOK_SIZE, AverageFace, BovwCodeFace
from .errors import ValidationError

SPMT_DIM = 13 * CODEBOOK_SIZE  # 3328


@dataclass(frozen=True)
class PyramidSpec:
    """Resolution levels and their weights w_l = 1 / 2**(L - l)."""

    L: int = 1

    def __post_init__(self):
        if self.L != 1:
            raise ValidationError("only the two-level pyramid (L=1) is supported")

    def weights(self) -> tuple[float, ...]:
        return tuple(1.0 / 2 ** (self.L - level) for level in range(self.L + 1))


@dataclass(frozen=True)
class PyramidRegions:
    """Whole face plus the four level-1 quadrants."""

    whole: np.ndarray  # (72, 64)
    quadrants: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]


@dataclass(frozen=True)
class CodeHistogram:
    values: np.ndarray  # (256,)
    weight: float
    level: int = 0
    region_index: int = 1

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if v.shape[0] != CODEBOOK_SIZE:
            raise ValidationError(f"histogram must have {CODEBOOK_SIZE} bins, got {v.shape[0]}")
        if not np.all(np.isfinite(v)) or v.min() < 0:
            raise ValidationError("histogram bins must be finite and nonnegative")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class MatchingDegreeVector:
    """Per-code min-ratio similarity against one class average, both the raw
    weighted entries and the L1-normalized (then re-weighted) form."""

    values: np.ndarray  # (256,) normalized, sum == weight
    raw: np.ndarray  # (256,) entries in [0, weight]
    weight: float
    class_tag: str
    level: int = 1
    region_index: int = 1

    def __post_init__(self):
        for name in ("values", "raw"):
            v = np.asarray(getattr(self, name), dtype=np.float64).reshape(-1)
            if v.shape[0] != CODEBOOK_SIZE:
                raise ValidationError(f"{name} must have {CODEBOOK_SIZE} entries")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class SpmtVector:
    values: np.ndarray  # (3328,)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if v.shape[0] != SPMT_DIM:
            raise ValidationError(f"descriptor must have {SPMT_DIM} entries, got {v.shape[0]}")
        object.__setattr__(self, "values", v)


def _codes_of(face) -> np.ndarray:
    return face.codes if hasattr(face, "codes") else np.asarray(face)


def subdivide(face: BovwCodeFace | np.ndarray) -> PyramidRegions:
    """Whole face plus four equal quadrants (row-major: tl, tr, bl, br)."""
    codes = _codes_of(face)
    h, w = codes.shape
    hh, hw = h // 2, w // 2
    return PyramidRegions(
        whole=codes,
        quadrants=(
            codes[:hh, :hw],
            codes[:hh, hw:],
            codes[hh:, :hw],
            codes[hh:, hw:],
        ),
    )


def _counts(region: np.ndarray) -> np.ndarray:
    flat = region.ravel()
    if flat.max(initial=0) >= CODEBOOK_SIZE:
        raise ValidationError("region contains codes outside [0, 256)")
    return np.bincount(flat, minlength=CODEBOOK_SIZE).astype(np.float64)


def region_histogram(
    region: np.ndarray, weight: float, level: int = 0, region_index: int = 1
) -> CodeHistogram:
    """Code histogram of one region: raw counts, L1-normalized, scaled by the
    region's pyramid weight."""
    region = np.asarray(region)
    if region.size == 0:
        raise ValidationError("cannot histogram an empty region")
    counts = _counts(region)
    return CodeHistogram(
        values=counts / region.size * weight,
        weight=weight,
        level=level,
        region_index=region_index,
    )


def matching_degree(
    region: np.ndarray,
    avg_region: np.ndarray,
    weight: float,
    class_tag: str,
    region_index: int = 1,
) -> MatchingDegreeVector:
    """Per-code similarity between a region and the matching average-face
    region.

    For each code the unweighted entry is 1 when both counts are zero, the
    min of the two count ratios when both are positive, and 0 when exactly
    one is zero (the limit of the min ratio). The raw vector scales that by
    the weight; the final vector L1-normalizes the unweighted entries and
    rescales by the weight.
    """
    region = np.asarray(region)
    avg_region = np.asarray(avg_region)
    if region.shape != avg_region.shape:
        raise ValidationError(f"region geometry mismatch: {region.shape} vs {avg_region.shape}")

    f = _counts(region)
    a = _counts(avg_region)
    unweighted = np.zeros(CODEBOOK_SIZE)
    both_zero = (f == 0) & (a == 0)
    both_pos = (f > 0) & (a > 0)
    unweighted[both_zero] = 1.0
    unweighted[both_pos] = np.minimum(f[both_pos] / a[both_pos], a[both_pos] / f[both_pos])

    total = unweighted.sum()
    values = weight * unweighted / total if total > 0 else np.zeros(CODEBOOK_SIZE)
    return MatchingDegreeVector(
        values=values,
        raw=weight * unweighted,
        weight=weight,
        class_tag=class_tag,
        level=1,
        region_index=region_index,
    )


def assemble_spmt(
    hists: list[CodeHistogram], mdvs: list[MatchingDegreeVector]
) -> SpmtVector:
    """Concatenate [whole-face hist, 4 quadrant hists, 4 positive matches,
    4 negative matches] into the 3328-d descriptor."""
    if len(hists) != 5:
        raise ValidationError(f"expected 5 histograms, got {len(hists)}")
    if len(mdvs) != 8:
        raise ValidationError(f"expected 8 matching-degree vectors, got {len(mdvs)}")
    tags = [m.class_tag for m in mdvs]
    if tags != ["positive"] * 4 + ["negative"] * 4:
        raise ValidationError("matching vectors must be 4 positive then 4 negative")
    blocks = [h.values for h in hists] + [m.values for m in mdvs]
    return SpmtVector(values=np.concatenate(blocks))


def compute_spmt(
    face: BovwCodeFace,
    avg_pos: AverageFace,
    avg_neg: AverageFace,
    spec: PyramidSpec = PyramidSpec(),
) -> SpmtVector:
    """Full descriptor of one code face against the two class averages."""
    w0, w1 = spec.weights()
    regions = subdivide(face)
    pos_regions = subdivide(avg_pos.codes)
    neg_regions = subdivide(avg_neg.codes)

    hists = [region_histogram(regions.whole, w0, level=0, region_index=1)]
    hists += [
        region_histogram(q, w1, level=1, region_index=i + 1)
        for i, q in enumerate(regions.quadrants)
    ]
    mdvs = [
        matching_degree(q, pq, w1, "positive", region_index=i + 1)
        for i, (q, pq) in enumerate(zip(regions.quadrants, pos_regions.quadrants))
    ]
    mdvs += [
        matching_degree(q, nq, w1, "negative", region_index=i + 1)
        for i, (q, nq) in enumerate(zip(regions.quadrants, neg_regions.quadrants))
    ]
    return assemble_spmt(hists, mdvs)
