"""Time the fused conv + max-pool kernels of every available backend.

    python3 benchmarks/bench_kernels.py [--batch 60] [--repeat 5] [--geometry full|reduced]

Checks that the backends agree before timing them.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from countpoint.kernels import backends
from countpoint.scene import FULL_GEOMETRY, REDUCED_GEOMETRY


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=60)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--geometry", choices=("full", "reduced"), default="full")
    ap.add_argument("--dtype", choices=("float32", "float64"), default="float32")
    args = ap.parse_args(argv)

    geo = FULL_GEOMETRY if args.geometry == "full" else REDUCED_GEOMETRY
    rng = np.random.default_rng(0)
    dt = np.dtype(args.dtype)
    x = (rng.random((args.batch,) + geo.shape) < 0.1).astype(dt)
    w = rng.normal(0, 0.3, (7, 3, 3)).astype(dt)
    b = rng.normal(0, 0.1, 7).astype(dt)

    impls = backends()
    ref_z, ref_idx = impls["python"].conv_pool_forward(x, w, b)
    dz = rng.normal(size=ref_z.shape).astype(dt)
    ref_dw, ref_db = impls["python"].conv_pool_backward(x, dz, ref_idx, 3)
    tol = 1e-4 if dt == np.float32 else 1e-10

    print("input %s x %dx%d, %s" % (args.batch, geo.image_height, geo.image_width, dt.name))
    print("%-8s %12s %12s" % ("backend", "forward ms", "backward ms"))
    base = None
    for name, mod in impls.items():
        z, idx = mod.conv_pool_forward(x, w, b)
        dw, db = mod.conv_pool_backward(x, dz, idx, 3)
        if not (np.allclose(z, ref_z, atol=tol) and np.array_equal(idx, ref_idx)
                and np.allclose(dw, ref_dw, rtol=tol, atol=tol) and np.allclose(db, ref_db, rtol=tol, atol=tol)):
            print("%s disagrees with the numpy backend" % name)
            return 1
        tf = best_of(lambda: mod.conv_pool_forward(x, w, b), args.repeat)
        tb = best_of(lambda: mod.conv_pool_backward(x, dz, idx, 3), args.repeat)
        if base is None:
            base = (tf, tb)
        print("%-8s %12.2f %12.2f   (x%.1f / x%.1f vs python)"
              % (name, tf * 1e3, tb * 1e3, base[0] / tf, base[1] / tb))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
