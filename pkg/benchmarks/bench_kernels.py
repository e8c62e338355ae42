#!/usr/bin/env python3
"""Time the numba kernels against their pure-numpy fallbacks.

The package picks one variant per kernel at import time (see
``STEREOSPOOF_NUMBA``); this script imports both variants directly, checks
they agree, and reports per-call timings and speedups on workloads shaped
like the real pipeline (64x72 crops, 256-word codebooks, k-means batches).

Run: python benchmarks/bench_kernels.py [--repeats N] [--json out.json]
"""

import argparse
import json
import time

import numpy as np

from stereospoof._accel import NUMBA_ENABLED
from stereospoof import _kernels
from stereospoof.texture import build_uniform_mapping, circle_offsets


def time_call(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_case(name, numba_fn, numpy_fn, args, repeats, check):
    numba_fn(*args)  # JIT warmup
    out_nb = numba_fn(*args)
    out_np = numpy_fn(*args)
    assert check(out_nb, out_np), f"{name}: variants disagree"
    t_nb = time_call(numba_fn, args, repeats)
    t_np = time_call(numpy_fn, args, repeats)
    print(
        f"{name:<28} numba {t_nb * 1e3:8.3f} ms   numpy {t_np * 1e3:8.3f} ms   "
        f"speedup {t_np / t_nb:6.2f}x"
    )
    return {"numba_s": t_nb, "numpy_s": t_np, "speedup": t_np / t_nb}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--json", help="write results to this JSON file")
    args = parser.parse_args()

    if not NUMBA_ENABLED:
        raise SystemExit(
            "numba is disabled (STEREOSPOOF_NUMBA=0 or not installed); "
            "nothing to compare against"
        )

    rng = np.random.default_rng(0)
    results = {}

    img = rng.integers(0, 256, (72, 64)).astype(np.float64)
    for P, R in ((8, 1), (8, 2), (16, 2)):
        off_x, off_y = circle_offsets(P, float(R))
        table = build_uniform_mapping(P).table
        results[f"lbp_label_map P={P} R={R}"] = bench_case(
            f"lbp_label_map P={P} R={R}",
            _kernels._lbp_label_map_numba,
            _kernels._lbp_label_map_numpy,
            (img, off_x, off_y, table),
            args.repeats,
            np.array_equal,
        )

    def pair_equal(a, b):
        return np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    vectors = rng.uniform(0, 250, (72 * 64, 3))
    words = rng.uniform(0, 250, (256, 3))
    results["bovw_encode 4608x256"] = bench_case(
        "bovw_encode 4608x256",
        _kernels._nearest_centroid3_numba,
        _kernels._nearest_centroid3_numpy,
        (vectors, words),
        args.repeats,
        pair_equal,
    )

    samples = rng.uniform(0, 250, (200_000, 3))
    results["kmeans_assign 200kx256"] = bench_case(
        "kmeans_assign 200kx256",
        _kernels._nearest_centroid3_numba,
        _kernels._nearest_centroid3_numpy,
        (samples, words),
        max(3, args.repeats // 4),
        pair_equal,
    )

    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)
        print(f"wrote {args.json}")


if __name__ == "__main__":
    main()
