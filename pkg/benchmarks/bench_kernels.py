"""Compare the numba and numpy implementations of the hot loops.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Each row reports the best of ``--repeat`` timings after one warm-up call
(so numba compile time is excluded) and the largest absolute difference
between the two outputs.
"""

import argparse
import timeit

import numpy as np

from ergodrift import _kernels
from ergodrift.coeffs import make_fbm_coeffs


def cases():
    rng = np.random.default_rng(0)
    a = np.ascontiguousarray(make_fbm_coeffs(0.3, 1.0, 4096).values)
    a_long = np.ascontiguousarray(make_fbm_coeffs(0.3, 1.0, 20_000).values)
    x = rng.standard_normal((14_096, 1))
    g = np.zeros((10_000, 1))
    g[:50] = rng.standard_normal((50, 1)) * 0.1
    M = np.array([[0.9]])
    S = np.array([[1.0]])
    dl = rng.standard_normal((10_000, 1))
    k = np.arange(1, 2_000_001, dtype=np.float64)
    A, B = k**-0.7, k**-1.3
    ns = np.unique(np.geomspace(1, 1_999_999, 150).astype(np.int64))

    def drift(impl):
        h = g.copy()
        impl.successful_drift(a, h, 50, 10_000, 0)
        return h

    return [
        ("inverse_recursion K=2e4", lambda impl: impl.inverse_recursion(a_long)),
        ("moving_average T=1e4 K=4096", lambda impl: impl.moving_average(a, x, 4096, 14_096)),
        ("successful_drift T=1e4 K=4096", drift),
        ("moving_average T=16 K=4096", lambda impl: impl.moving_average(a, x, 14_080, 14_096)),
        ("memory_tail dense n=4096", lambda impl: impl.memory_tail(a, x, 8000, 4096, 0)),
        ("memory_tail sparse n=4096", lambda impl: impl.memory_tail(a, g, 5000, 4096, 0)),
        ("affine_recursion T=1e4", lambda impl: impl.affine_recursion(M, S, np.zeros(1), dl)),
        ("conv_sum_grid n<=2e6", lambda impl: impl.conv_sum_grid(A, B, ns)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _kernels.NUMBA is None:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'kernel':32s} {'numpy s':>10s} {'numba s':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, fn in cases():
        out_np = fn(_kernels.NUMPY)
        out_nb = fn(_kernels.NUMBA)  # warm-up and compile
        t_np = min(timeit.repeat(lambda: fn(_kernels.NUMPY), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: fn(_kernels.NUMBA), number=1, repeat=args.repeat))
        diff = float(np.max(np.abs(np.asarray(out_np) - np.asarray(out_nb))))
        print(f"{name:32s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
