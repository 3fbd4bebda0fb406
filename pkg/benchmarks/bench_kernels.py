"""Compare the numba kernels with their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 3] [--grid 32]

Both paths are called directly, so GEOBEAM_DISABLE_NUMBA has no effect here.
"""

import argparse
import time

import numpy as np

from geobeam import _kernels
from geobeam.geom import random_geodesic
from geobeam.measures import Dictionary
from geobeam.quadrature import GeodesicGrid


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--grid", type=int, default=32, help="nodes per S^2 factor axis")
    ap.add_argument("--points", type=int, default=200_000)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not available")

    rng = np.random.default_rng(0)
    x = rng.standard_normal((args.points, 4))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    b = np.stack([random_geodesic(3, rng).b for _ in range(5)])
    c = np.full(5, 0.2 + 0j)

    grid = GeodesicGrid.build(args.grid, args.grid)
    dic = Dictionary.default()
    gargs = (grid.first.nodes, grid.first.weights, grid.second.nodes, grid.second.weights,
             b[:2], c[:2], 32, dic.bump_centers, dic.bump_scales, np.zeros((0, 6)), np.zeros(0))

    cases = [
        (f"beam_sum_values  {args.points} pts, 5 terms, k=32",
         lambda: _kernels.beam_sum_values_nb(x, b, c, 32),
         lambda: _kernels.beam_sum_values_np(x, b, c, 32)),
        (f"beam_sum_values  {args.points} pts, 5 terms, k=128 (polar)",
         lambda: _kernels.beam_sum_values_nb(x, b, c, 128),
         lambda: _kernels.beam_sum_values_np(x, b, c, 128)),
        (f"grid moments     {len(grid)} nodes, 2 terms, 16 bumps",
         lambda: _kernels._grid_moments_nb(*gargs),
         lambda: _kernels._grid_moments_np(*gargs)),
    ]
    # compile outside the timed region
    for _, nb, _np in cases:
        nb()

    print(f"{'kernel':58s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s} {'max rel diff':>13s}")
    for name, nb, npf in cases:
        t_nb, a = best_of(nb, args.repeat)
        t_np, ref = best_of(npf, args.repeat)
        diff = np.max(np.abs(a - ref)) / max(np.max(np.abs(ref)), 1e-300)
        print(f"{name:58s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f} {diff:13.1e}")


if __name__ == "__main__":
    main()
