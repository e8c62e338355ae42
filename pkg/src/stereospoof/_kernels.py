"""Hot per-pixel kernels, each in a numba and a pure-numpy variant.

The two variants of every kernel perform identical arithmetic in identical
order, so their outputs match bit-for-bit; which one backs the public name is
decided by :mod:`stereospoof._accel` at import time. Keep the pairs in sync
when editing.
"""

import numpy as np

from ._accel import NUMBA_ENABLED, jit

# ---------------------------------------------------------------------------
# Circular LBP label map


def _lbp_label_map_numpy(img, off_x, off_y, table):
    height, width = img.shape
    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    raw = np.zeros((height, width), dtype=np.int64)
    for k in range(off_x.shape[0]):
        sx = np.clip(xs + off_x[k], 0.0, width - 1.0)
        sy = np.clip(ys + off_y[k], 0.0, height - 1.0)
        x0 = np.floor(sx).astype(np.int64)
        y0 = np.floor(sy).astype(np.int64)
        x1 = np.minimum(x0 + 1, width - 1)
        y1 = np.minimum(y0 + 1, height - 1)
        fx = sx - x0
        fy = sy - y0
        v00 = img[y0[:, None], x0[None, :]]
        v01 = img[y0[:, None], x1[None, :]]
        v10 = img[y1[:, None], x0[None, :]]
        v11 = img[y1[:, None], x1[None, :]]
        val = (1.0 - fy)[:, None] * ((1.0 - fx)[None, :] * v00 + fx[None, :] * v01) + fy[
            :, None
        ] * ((1.0 - fx)[None, :] * v10 + fx[None, :] * v11)
        raw |= (val >= img).astype(np.int64) << k
    return table[raw]


def _lbp_label_map_loops(img, off_x, off_y, table):
    height, width = img.shape
    n_neighbors = off_x.shape[0]
    out = np.empty((height, width), dtype=np.uint8)
    for y in range(height):
        for x in range(width):
            center = img[y, x]
            raw = 0
            for k in range(n_neighbors):
                sx = x + off_x[k]
                sy = y + off_y[k]
                if sx < 0.0:
                    sx = 0.0
                elif sx > width - 1.0:
                    sx = width - 1.0
                if sy < 0.0:
                    sy = 0.0
                elif sy > height - 1.0:
                    sy = height - 1.0
                x0 = int(np.floor(sx))
                y0 = int(np.floor(sy))
                x1 = x0 + 1 if x0 + 1 < width else width - 1
                y1 = y0 + 1 if y0 + 1 < height else height - 1
                fx = sx - x0
                fy = sy - y0
                val = (1.0 - fy) * ((1.0 - fx) * img[y0, x0] + fx * img[y0, x1]) + fy * (
                    (1.0 - fx) * img[y1, x0] + fx * img[y1, x1]
                )
                if val >= center:
                    raw |= 1 << k
            out[y, x] = table[raw]
    return out


# ---------------------------------------------------------------------------
# Nearest centroid over 3-d points (BOVW coding and the k-means assign step)


def _nearest_centroid3_numpy(vectors, centers):
    d0 = vectors[:, 0][:, None] - centers[:, 0][None, :]
    d1 = vectors[:, 1][:, None] - centers[:, 1][None, :]
    d2 = vectors[:, 2][:, None] - centers[:, 2][None, :]
    dists = d0 * d0 + d1 * d1 + d2 * d2
    labels = np.argmin(dists, axis=1).astype(np.int64)  # argmin takes the lowest index on ties
    return labels, dists[np.arange(vectors.shape[0]), labels]


def _nearest_centroid3_loops(vectors, centers):
    n = vectors.shape[0]
    k = centers.shape[0]
    labels = np.empty(n, dtype=np.int64)
    best = np.empty(n, dtype=np.float64)
    for i in range(n):
        v0 = vectors[i, 0]
        v1 = vectors[i, 1]
        v2 = vectors[i, 2]
        best_d = np.inf
        best_j = 0
        for j in range(k):
            e0 = v0 - centers[j, 0]
            e1 = v1 - centers[j, 1]
            e2 = v2 - centers[j, 2]
            d = e0 * e0 + e1 * e1 + e2 * e2
            if d < best_d:  # strict: lowest index wins ties
                best_d = d
                best_j = j
        labels[i] = best_j
        best[i] = best_d
    return labels, best


_lbp_label_map_numba = jit(_lbp_label_map_loops) if NUMBA_ENABLED else None
_nearest_centroid3_numba = jit(_nearest_centroid3_loops) if NUMBA_ENABLED else None

if NUMBA_ENABLED:
    lbp_label_map = _lbp_label_map_numba
    nearest_centroid3 = _nearest_centroid3_numba
else:
    lbp_label_map = _lbp_label_map_numpy
    nearest_centroid3 = _nearest_centroid3_numpy


def warmup():
    """Trigger JIT compilation so timing-sensitive callers pay it up front."""
    img = np.zeros((4, 4), dtype=np.float64)
    off = np.array([1.0, 0.0, -1.0, 0.0])
    table = np.zeros(16, dtype=np.uint8)
    lbp_label_map(img, off[:2], off[2:], table[:4])
    nearest_centroid3(np.zeros((2, 3)), np.zeros((2, 3)))
