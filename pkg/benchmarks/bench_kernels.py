"""Compare the numba and pure-numpy kernel implementations.

    python3 benchmarks/bench_kernels.py [--shots N] [--repeats K]

Both variants are imported directly (``*_nb`` / ``*_np``), so the
``CORRTOMO_DISABLE_NUMBA`` switch does not matter here.  Outputs are checked
for agreement before timing.
"""

import argparse
import time
import warnings

import numpy as np

warnings.filterwarnings("ignore", module="numba")

from corrtomo import kernels  # noqa: E402
from corrtomo.channelizer import design_lowpass  # noqa: E402


def best_time(fn, repeats):
    fn()   # warm-up (JIT compile)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(shots, rng):
    x = rng.standard_normal((shots, 1000))
    xc = x + 1j * rng.standard_normal((shots, 1000))
    taps = design_lowpass(35e6, 500e6).taps
    drive = np.full(2 * 1000 + 1, 1 + 0.5j)
    s0 = rng.standard_normal((shots, 200))
    s1 = rng.standard_normal((shots, 200)) + 0.5
    return {
        "fir_decimate real x5": (kernels.fir_decimate_np, kernels.fir_decimate_nb, (x, taps, 5), x.size),
        "fir_decimate complex x4": (kernels.fir_decimate_np, kernels.fir_decimate_nb, (xc, taps, 4), xc.size),
        "cavity_rk4 1000 steps": (kernels.cavity_rk4_np, kernels.cavity_rk4_nb,
                                  (drive, complex(-np.pi * 1e6, -2 * np.pi * 1e6), 2e-9), 1000),
        "window_separation 200 cols": (kernels.window_separation_np, kernels.window_separation_nb,
                                       (s0, s1), s0.size),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--shots", type=int, default=2000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'numpy s':>12}{'numba s':>12}{'speedup':>10}{'numba items/s':>16}")
    for name, (f_np, f_nb, fargs, items) in cases(args.shots, rng).items():
        a, b = f_np(*fargs), f_nb(*fargs)
        if not np.allclose(a, b, rtol=1e-9, atol=1e-9):
            raise SystemExit(f"{name}: numba and numpy results differ")
        t_np = best_time(lambda: f_np(*fargs), args.repeats)
        t_nb = best_time(lambda: f_nb(*fargs), args.repeats)
        print(f"{name:<28}{t_np:>12.4g}{t_nb:>12.4g}{t_np / t_nb:>10.2f}{items / t_nb:>16.4g}")


if __name__ == "__main__":
    main()
