"""Time the compiled and pure-Python kernels on session-sized inputs.

Usage: python benchmarks/bench_kernels.py [--samples N] [--repeat R]
"""
import argparse
import timeit

import numpy as np

from cowqkd import kernels
from cowqkd.receiver import lowpass_coefficients


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=32_000,
                        help="waveform length; one 1000-symbol 2-pulse frame is 32000")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    x = np.random.default_rng(0).normal(size=args.samples)
    b0, b1, a1 = lowpass_coefficients(750e6, 16e9)
    backends = kernels.available_backends()
    print(f"active backend: {kernels.BACKEND}; samples: {args.samples}")

    results = {}
    for name, mod in sorted(backends.items()):
        cases = {
            "onepole_filter": lambda m=mod: m.onepole_filter(x, b0, b1, a1, 0.0),
            "slot_energies": lambda m=mod: m.slot_energies(x, 16, 0.0),
        }
        for case, fn in cases.items():
            best = min(timeit.repeat(fn, number=1, repeat=args.repeat))
            results[(name, case)] = best
            print(f"{name:>7} {case:<15} {best * 1e3:9.3f} ms")

    if "cython" in backends:
        np.testing.assert_allclose(backends["cython"].onepole_filter(x, b0, b1, a1, 0.0),
                                   backends["python"].onepole_filter(x, b0, b1, a1, 0.0),
                                   rtol=1e-12)
        for case in ("onepole_filter", "slot_energies"):
            speedup = results[("python", case)] / results[("cython", case)]
            print(f"speedup {case:<15} {speedup:8.1f}x")


if __name__ == "__main__":
    main()
