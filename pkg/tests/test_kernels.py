"""The numba and numpy kernel variants must agree bit-for-bit, and the env
flag must select the numpy path."""

import os
import subprocess
import sys

import numpy as np
import pytest

from stereospoof import _kernels
from stereospoof._accel import NUMBA_ENABLED
from stereospoof.texture import build_uniform_mapping, circle_offsets


@pytest.mark.skipif(not NUMBA_ENABLED, reason="numba disabled in this environment")
class TestVariantEquivalence:
    def test_lbp_label_map(self, rng):
        img = rng.integers(0, 256, (72, 64)).astype(np.float64)
        for P, R in ((8, 1), (8, 2), (16, 2)):
            off_x, off_y = circle_offsets(P, float(R))
            table = build_uniform_mapping(P).table
            numba_out = _kernels._lbp_label_map_numba(img, off_x, off_y, table)
            numpy_out = _kernels._lbp_label_map_numpy(img, off_x, off_y, table)
            assert np.array_equal(numba_out, numpy_out)

    def test_nearest_centroid(self, rng):
        vectors = rng.uniform(0, 250, (4000, 3))
        centers = rng.uniform(0, 250, (256, 3))
        nb_labels, nb_dists = _kernels._nearest_centroid3_numba(vectors, centers)
        np_labels, np_dists = _kernels._nearest_centroid3_numpy(vectors, centers)
        assert np.array_equal(nb_labels, np_labels)
        assert np.array_equal(nb_dists, np_dists)

    def test_tie_handling_identical(self):
        vectors = np.array([[1.0, 0.0, 0.0]])
        centers = np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        for impl in (_kernels._nearest_centroid3_numba, _kernels._nearest_centroid3_numpy):
            labels, _ = impl(vectors, centers)
            assert labels[0] == 0


class TestEnvFlag:
    def test_flag_forces_numpy_path(self):
        code = (
            "from stereospoof._accel import NUMBA_ENABLED;"
            "from stereospoof import _kernels;"
            "assert not NUMBA_ENABLED;"
            "assert _kernels.lbp_label_map is _kernels._lbp_label_map_numpy;"
            "assert _kernels.nearest_centroid3 is _kernels._nearest_centroid3_numpy;"
            "print('numpy path active')"
        )
        env = dict(os.environ, STEREOSPOOF_NUMBA="0")
        result = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True
        )
        assert result.returncode == 0, result.stderr
        assert "numpy path active" in result.stdout

    def test_feature_faces_identical_across_modes(self, tmp_path, rng):
        """The same crop must code identically under both acceleration modes."""
        img = rng.integers(0, 256, (72, 64)).astype(np.uint8)
        np.save(tmp_path / "crop.npy", img)
        code = (
            "import numpy as np;"
            "from stereospoof.texture import mslbp_face, FaceCrop;"
            f"img = np.load(r'{tmp_path / 'crop.npy'}');"
            "labels = mslbp_face(FaceCrop(img)).labels;"
            f"np.save(r'{tmp_path / 'out.npy'}', labels)"
        )
        outputs = {}
        for mode in ("1", "0"):
            env = dict(os.environ, STEREOSPOOF_NUMBA=mode)
            result = subprocess.run(
                [sys.executable, "-c", code], env=env, capture_output=True, text=True
            )
            assert result.returncode == 0, result.stderr
            outputs[mode] = np.load(tmp_path / "out.npy")
        assert np.array_equal(outputs["1"], outputs["0"])
