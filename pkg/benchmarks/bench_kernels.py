"""Benchmark the numba kernels against the pure-numpy fallbacks.

Runs each kernel flavour on the same inputs, checks agreement, and
prints per-size timings with the speedup. Invoke from the repo root:

    python benchmarks/bench_kernels.py [--dims 10 12 14 16] [--repeat 5]

The numpy flavour is always available; the numba flavour is skipped if
numba is not importable or NSHAPLEY_DISABLE_NUMBA is set.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from nshapley import _kernels  # noqa: E402


def _time(fn, *args, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dims", type=int, nargs="*", default=[10, 12, 14, 16])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    flavours = list(_kernels.IMPLEMENTATIONS)
    print(f"kernel flavours available: {flavours}")
    if "numba" not in flavours:
        print("numba flavour unavailable; timing the numpy path only")

    rng = np.random.default_rng(0)
    header = f"{'kernel':<20} {'dim':>4} " + " ".join(f"{name:>12}" for name in flavours)
    if len(flavours) == 2:
        header += f" {'speedup':>9}"
    print(header)

    for dim in args.dims:
        values = rng.normal(size=1 << dim)
        weights = np.abs(rng.normal(size=(dim + 1, dim + 1))) + 0.1
        cols = rng.uniform(-0.2, 1.2, size=(1 << dim, 3))
        lo = np.zeros(3)
        step = np.full(3, 0.25)
        npts = np.full(3, 5, dtype=np.int64)
        flat = rng.normal(size=125)

        cases = {
            "zeta_subsets": (values, dim),
            "moebius_subsets": (values, dim),
            "zeta_supersets": (values, dim),
            "interp_multilinear": (cols, lo, step, npts, flat),
        }
        if dim <= 12:  # the brute-force measure is O(4**dim)
            cases["delta_weighted"] = (values, dim, weights)

        for name, call_args in cases.items():
            timings = []
            results = []
            for flavour in flavours:
                fn = _kernels.IMPLEMENTATIONS[flavour][name]
                out = fn(*call_args)  # warm (and jit-compile)
                results.append(out[0] if isinstance(out, tuple) else out)
                timings.append(_time(fn, *call_args, repeat=args.repeat))
            if len(results) == 2 and not np.allclose(results[0], results[1], atol=1e-9):
                print(f"!! {name} dim={dim}: flavours disagree")
                return 1
            row = f"{name:<20} {dim:>4} " + " ".join(f"{t * 1e3:>10.3f}ms" for t in timings)
            if len(timings) == 2:
                row += f" {timings[0] / timings[1]:>8.1f}x"
            print(row)
    return 0


if __name__ == "__main__":
    sys.exit(main())
