"""Compare the compiled and pure-Python lattice kernels.

Times ``core_lengths`` on a batch of random ray segments and a full
``angular_transmittance`` sweep under each backend, checks that the outputs
agree, and prints a small table.

    python benchmarks/bench_kernels.py [--rays N] [--repeat R]
"""

import argparse
import time

import numpy as np

from fopsim import kernels
from fopsim.fop_tracer import angular_transmittance, low_na_design


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rays", type=int, default=20000)
    ap.add_argument("--samples", type=int, default=2048)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    if kernels._compiled is None:
        print("compiled kernel not built; only the Python backend is available")
        backends = ["python"]
    else:
        backends = ["cython", "python"]

    rng = np.random.default_rng(0)
    design = low_na_design()
    n = args.rays
    x0, y0 = rng.uniform(0, design.p, n), rng.uniform(0, design.p, n)
    phi = rng.uniform(0, 2 * np.pi, n)
    ux, uy = np.cos(phi), np.sin(phi)
    length = rng.uniform(0, 400.0, n)
    grid = np.arange(0.0, 90.0, 1.0)

    results = {}
    for b in backends:
        t_k, lens = best_of(lambda: kernels.core_lengths(x0, y0, ux, uy, length, design.p,
                                                         design.d / 2, backend=b), args.repeat)
        t_s, resp = best_of(lambda: angular_transmittance(design, grid, args.samples, 0,
                                                          backend=b), args.repeat)
        results[b] = (t_k, t_s, lens, resp.transmittance)

    print(f"{'backend':<8} {'core_lengths':>14} {'angle sweep':>14}")
    for b, (t_k, t_s, _, _) in results.items():
        print(f"{b:<8} {t_k * 1e3:>11.1f} ms {t_s:>12.2f} s")
    if len(results) == 2:
        c, p = results["cython"], results["python"]
        print(f"speedup  {p[0] / c[0]:>13.1f}x {p[1] / c[1]:>13.1f}x")
        print(f"max |diff| core_lengths {np.max(np.abs(c[2] - p[2])):.2e}, "
              f"transmittance {np.max(np.abs(c[3] - p[3])):.2e}")


if __name__ == "__main__":
    main()
