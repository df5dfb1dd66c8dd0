"""Time the compiled Catoni kernels against the numpy fallback.

Usage: ``python benchmarks/bench_kernels.py [--repeat N]``
"""

import argparse
import timeit

import numpy as np

from force_rl import _backend


def cases(rng):
    x_small = np.sort(rng.standard_t(2.5, 50))
    x_large = np.sort(rng.standard_t(2.5, 5000))
    batch = np.ascontiguousarray(np.sort(rng.standard_t(2.5, (256, 500)), axis=1))
    alphas = 10 ** rng.uniform(-2, 1, 256)
    y = rng.standard_normal(100_000)
    return {
        "psi (1e5)": lambda k: k.psi(y),
        "root T=50": lambda k: k.root_sorted(x_small, 0.3, 1e-10, 200),
        "root T=5000": lambda k: k.root_sorted(x_large, 0.3, 1e-10, 200),
        "roots 256x500": lambda k: k.roots_sorted(batch, alphas, 1e-10, 200),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _backend.compiled_kernels is None:
        print("compiled extension not built; only the python backend is available")
    backends = [("python", _backend.python_kernels)]
    if _backend.compiled_kernels is not None:
        backends.append(("compiled", _backend.compiled_kernels))
    print(f"{'case':<16}" + "".join(f"{name:>14}" for name, _ in backends) + f"{'speedup':>10}")
    for label, fn in cases(np.random.default_rng(0)).items():
        times = []
        for _, k in backends:
            n = 3
            times.append(min(timeit.repeat(lambda: fn(k), number=n, repeat=args.repeat)) / n)
        speed = f"{times[0] / times[1]:>9.1f}x" if len(times) == 2 else ""
        print(f"{label:<16}" + "".join(f"{t * 1e3:>11.3f} ms" for t in times) + speed)


if __name__ == "__main__":
    main()
