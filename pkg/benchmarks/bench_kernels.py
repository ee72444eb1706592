"""Time each hot kernel under its numba and numpy implementations.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both implementations are imported directly, so the CELLTRACK_DISABLE_NUMBA
flag does not matter here. Outputs are cross-checked before timing.
"""
import argparse
import time

import numpy as np

from celltrack import kernels
from celltrack._accel import NUMBA_INSTALLED
from celltrack.siamese import SiameseHead
from celltrack.simulator import SimConfig, simulate


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(rng):
    seq = simulate(SimConfig(width=256, height=256, frames=2, initial_cells=50, seed=1))
    a = np.ascontiguousarray(seq.frames[1].labels.ravel())
    b = np.ascontiguousarray(seq.frames[0].labels.ravel())
    ua, ub = np.unique(a[a > 0]), np.unique(b[b > 0])
    yield "pair_counts 256x256, 50x50 labels", "pair_counts", lambda: (a, b, ua, ub)

    head = SiameseHead.init(8, rng)
    X, Y = rng.normal(size=(50, 8)), rng.normal(size=(50, 8))
    yield "pair_scores 50x50, dim 8", "pair_scores", lambda: (head.W1, head.b1, head.W2, head.b2, X, Y)

    n = 2000
    A = rng.normal(size=(n, 8))
    B = A + rng.normal(0, 0.5, size=A.shape)
    y = rng.integers(0, 2, size=n).astype(np.float64)
    order = rng.permutation(n)

    def sgd_args():
        st = [head.W1.copy(), head.b1.copy(), head.W2.copy(), np.array([head.b2])]
        return (*st, *[np.zeros_like(x) for x in st], A, B, y, order, 0.0025, 0.9, 1e-7)

    yield f"sgd_epoch {n} pairs, dim 8", "sgd_epoch", sgd_args


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    if not NUMBA_INSTALLED:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<36}{'numpy (ms)':>12}{'numba (ms)':>12}{'speedup':>10}")
    for title, name, make_args in cases(rng):
        f_np = getattr(kernels, f"{name}_numpy")
        f_nb = getattr(kernels, f"{name}_numba")
        ref, got = f_np(*make_args()), f_nb(*make_args())  # also compiles
        np.testing.assert_allclose(got, ref, rtol=1e-9, atol=1e-12)
        t_np = _best(lambda: f_np(*make_args()), args.repeat)
        t_nb = _best(lambda: f_nb(*make_args()), args.repeat)
        print(f"{title:<36}{t_np * 1e3:>12.2f}{t_nb * 1e3:>12.2f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
