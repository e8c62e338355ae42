import numpy as np
import pytest

from oracles import tally_histogram
from stereospoof.codebook import AverageFace, BovwCodeFace
from stereospoof.errors import ValidationError
from stereospoof.pyramid import (
    SPMT_DIM,
    CodeHistogram,
    MatchingDegreeVector,
    PyramidSpec,
    assemble_spmt,
    compute_spmt,
    matching_degree,
    region_histogram,
    subdivide,
)
from stereospoof.texture import CROP_HEIGHT, CROP_WIDTH


def random_code_face(rng) -> BovwCodeFace:
    return BovwCodeFace(codes=rng.integers(0, 256, (CROP_HEIGHT, CROP_WIDTH)).astype(np.uint8))


def average_from(face: BovwCodeFace, tag: str) -> AverageFace:
    return AverageFace(codes=face.codes.copy(), class_tag=tag, count=1)


class TestPyramidSpec:
    def test_weights(self):
        assert PyramidSpec().weights() == (0.5, 1.0)

    def test_deeper_pyramids_rejected(self):
        with pytest.raises(ValidationError):
            PyramidSpec(L=2)


class TestSubdivide:
    def test_quadrant_geometry(self, rng):
        regions = subdivide(random_code_face(rng))
        assert regions.whole.shape == (72, 64)
        sizes = [q.size for q in regions.quadrants]
        assert sizes == [1152] * 4
        assert sum(sizes) == 72 * 64

    def test_quadrants_are_disjoint_and_cover(self, rng):
        face = BovwCodeFace(
            codes=np.arange(72 * 64, dtype=np.int64).reshape(72, 64).astype(np.uint8) % 251
        )
        regions = subdivide(face)
        rebuilt = np.vstack(
            [
                np.hstack([regions.quadrants[0], regions.quadrants[1]]),
                np.hstack([regions.quadrants[2], regions.quadrants[3]]),
            ]
        )
        assert np.array_equal(rebuilt, face.codes)

    def test_distinct_constant_quadrants(self):
        codes = np.zeros((72, 64), np.uint8)
        codes[:36, :32] = 1
        codes[:36, 32:] = 2
        codes[36:, :32] = 3
        codes[36:, 32:] = 4
        regions = subdivide(BovwCodeFace(codes=codes))
        for i, q in enumerate(regions.quadrants, start=1):
            assert np.all(q == i)


class TestRegionHistogram:
    def test_constant_whole_face(self):
        region = np.full((72, 64), 7, np.uint8)
        hist = region_histogram(region, weight=0.5)
        assert hist.values[7] == pytest.approx(0.5)
        assert hist.values.sum() == pytest.approx(0.5)
        assert np.count_nonzero(hist.values) == 1

    def test_two_code_quadrant(self):
        region = np.full((36, 32), 1, np.uint8)
        region[:, 16:] = 2
        hist = region_histogram(region, weight=1.0)
        assert hist.values[1] == pytest.approx(0.5)
        assert hist.values[2] == pytest.approx(0.5)

    def test_matches_naive_tally(self, rng):
        region = rng.integers(0, 256, (36, 32)).astype(np.uint8)
        hist = region_histogram(region, weight=1.0)
        tally = tally_histogram(region, 256)
        assert np.allclose(hist.values, tally / region.size)
        assert hist.values.sum() == pytest.approx(1.0, abs=1e-9)

    def test_empty_region_rejected(self):
        with pytest.raises(ValidationError):
            region_histogram(np.zeros((0, 4), np.uint8), weight=1.0)

    def test_level_zero_counts_equal_quadrant_sums(self, rng):
        face = random_code_face(rng)
        regions = subdivide(face)
        whole = np.bincount(regions.whole.ravel(), minlength=256)
        quadrant_sum = sum(np.bincount(q.ravel(), minlength=256) for q in regions.quadrants)
        assert np.array_equal(whole, quadrant_sum)


class TestMatchingDegree:
    def test_identical_regions_give_all_weight_raw(self, rng):
        region = rng.integers(0, 256, (36, 32)).astype(np.uint8)
        mdv = matching_degree(region, region.copy(), weight=1.0, class_tag="positive")
        assert np.allclose(mdv.raw, 1.0)
        assert np.allclose(mdv.values, 1.0 / 256)

    def test_min_ratio_entry(self):
        region = np.zeros((36, 32), np.uint8)
        region.ravel()[:4] = 5  # f(5) = 4
        avg = np.zeros((36, 32), np.uint8)
        avg.ravel()[:8] = 5  # a(5) = 8
        mdv = matching_degree(region, avg, weight=1.0, class_tag="positive")
        assert mdv.raw[5] == pytest.approx(0.5)

    def test_one_sided_zero_is_zero(self):
        region = np.zeros((36, 32), np.uint8)
        region.ravel()[:5] = 9  # f(9) = 5
        avg = np.zeros((36, 32), np.uint8)  # a(9) = 0
        mdv = matching_degree(region, avg, weight=1.0, class_tag="negative")
        assert mdv.raw[9] == 0.0

    def test_symmetric_in_f_and_a(self, rng):
        region = rng.integers(0, 40, (36, 32)).astype(np.uint8)
        avg = rng.integers(0, 40, (36, 32)).astype(np.uint8)
        forward = matching_degree(region, avg, weight=1.0, class_tag="positive")
        backward = matching_degree(avg, region, weight=1.0, class_tag="positive")
        assert np.array_equal(forward.raw, backward.raw)

    def test_raw_entries_bounded_by_weight(self, rng):
        region = rng.integers(0, 256, (36, 32)).astype(np.uint8)
        avg = rng.integers(0, 256, (36, 32)).astype(np.uint8)
        mdv = matching_degree(region, avg, weight=0.5, class_tag="positive")
        assert mdv.raw.min() >= 0.0 and mdv.raw.max() <= 0.5 + 1e-12
        assert mdv.values.sum() == pytest.approx(0.5, abs=1e-9)

    def test_geometry_mismatch_rejected(self, rng):
        with pytest.raises(ValidationError):
            matching_degree(
                np.zeros((36, 32), np.uint8), np.zeros((72, 64), np.uint8), 1.0, "positive"
            )


class TestAssembleSpmt:
    @staticmethod
    def _parts(rng):
        hists = [CodeHistogram(values=rng.uniform(0, 1, 256), weight=0.5, level=0)]
        hists += [
            CodeHistogram(values=rng.uniform(0, 1, 256), weight=1.0, level=1, region_index=i)
            for i in range(1, 5)
        ]
        mdvs = [
            MatchingDegreeVector(
                values=rng.uniform(0, 1, 256),
                raw=rng.uniform(0, 1, 256),
                weight=1.0,
                class_tag=tag,
                region_index=i,
            )
            for tag in ("positive", "negative")
            for i in range(1, 5)
        ]
        return hists, mdvs

    def test_dimension_is_3328(self, rng):
        hists, mdvs = self._parts(rng)
        assert assemble_spmt(hists, mdvs).values.shape == (SPMT_DIM,)
        assert SPMT_DIM == 13 * 256

    def test_zeroed_inputs_give_zero_vector(self):
        hists = [CodeHistogram(values=np.zeros(256), weight=0.5, level=0)]
        hists += [CodeHistogram(values=np.zeros(256), weight=1.0, level=1) for _ in range(4)]
        mdvs = [
            MatchingDegreeVector(np.zeros(256), np.zeros(256), 1.0, tag)
            for tag in ("positive",) * 4 + ("negative",) * 4
        ]
        assert np.all(assemble_spmt(hists, mdvs).values == 0.0)

    def test_wrong_counts_rejected(self, rng):
        hists, mdvs = self._parts(rng)
        with pytest.raises(ValidationError):
            assemble_spmt(hists[:4], mdvs)
        with pytest.raises(ValidationError):
            assemble_spmt(hists, mdvs[:7])

    def test_wrong_tag_order_rejected(self, rng):
        hists, mdvs = self._parts(rng)
        with pytest.raises(ValidationError):
            assemble_spmt(hists, mdvs[4:] + mdvs[:4])


class TestComputeSpmt:
    def test_block_masses(self, rng):
        vec = compute_spmt(
            random_code_face(rng),
            average_from(random_code_face(rng), "positive"),
            average_from(random_code_face(rng), "negative"),
        )
        blocks = vec.values.reshape(13, 256)
        masses = blocks.sum(axis=1)
        assert masses[0] == pytest.approx(0.5, abs=1e-9)
        for m in masses[1:]:
            assert m == pytest.approx(1.0, abs=1e-9)
        assert vec.values.sum() == pytest.approx(12.5, abs=1e-8)
        assert vec.values.min() >= 0.0 and vec.values.max() <= 1.0

    def test_quadrant_swap_permutes_blocks(self, rng):
        face = random_code_face(rng)
        # quadrant-uniform averages so matching blocks permute exactly
        avg_codes = np.tile(rng.integers(0, 256, (36, 32)).astype(np.uint8), (2, 2))
        avg_pos = AverageFace(codes=avg_codes, class_tag="positive", count=1)
        neg_codes = np.tile(rng.integers(0, 256, (36, 32)).astype(np.uint8), (2, 2))
        avg_neg = AverageFace(codes=neg_codes, class_tag="negative", count=1)

        swapped_codes = face.codes.copy()
        swapped_codes[:36, :32], swapped_codes[:36, 32:] = (
            face.codes[:36, 32:].copy(),
            face.codes[:36, :32].copy(),
        )
        base = compute_spmt(face, avg_pos, avg_neg).values.reshape(13, 256)
        swapped = compute_spmt(BovwCodeFace(codes=swapped_codes), avg_pos, avg_neg).values.reshape(13, 256)

        assert np.array_equal(base[0], swapped[0])  # level-0 block unchanged
        perm = {1: 2, 2: 1, 3: 3, 4: 4}
        for src, dst in perm.items():
            assert np.array_equal(base[src], swapped[dst])  # histograms
            assert np.array_equal(base[4 + src], swapped[4 + dst])  # positive matches
            assert np.array_equal(base[8 + src], swapped[8 + dst])  # negative matches
