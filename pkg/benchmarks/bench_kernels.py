"""Compare the compiled kernels with the NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--n 1000000] [--repeat 3]
"""

import argparse
import timeit

import numpy as np

from armarg.kernels import load_backend


def cases(n: int, rng):
    M = np.array([[0.99, 0.01], [-0.01, 0.98]])
    L = np.array([[1e-3, 0.0], [2e-3, 1e-2]])
    xi2 = rng.standard_normal((n, 2))
    xiL = rng.standard_normal((1, n))
    w = rng.standard_normal(n)
    return {
        "var2_simulate": lambda k: k.var2_simulate(M, L, np.zeros(2), xi2),
        "langevin_euler": lambda k: k.langevin_euler(np.zeros(1), np.zeros(1), 1.0, -1.0, 1.0, 1.4, 1e-3, xiL, 10),
        "ma1_innovations": lambda k: k.ma1_innovations(w, 0.3),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = {"python": load_backend("python")}
    try:
        backends["cython"] = load_backend("cython")
    except ImportError:
        print("compiled extension not available; timing the fallback only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases(args.n, rng).items():
        times = {b: min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat)) for b, k in backends.items()}
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:<18}" + "".join(f"{t:>11.4f}s" for t in times.values()) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
