"""Time every hot kernel under numba and under the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel is called once untimed (numba compilation / cache load), then the
best of ``--repeat`` runs is reported together with the max deviation between
the two backends.
"""
import argparse
import time

import numpy as np

from phasestar import _kernels as K


def _cases(rng):
    n = 64
    af = rng.normal(size=(2 * n, 2 * n)) + 1j * rng.normal(size=(2 * n, 2 * n))
    ag = rng.normal(size=(2 * n, 2 * n)) + 1j * rng.normal(size=(2 * n, 2 * n))
    steps = 20000
    tgrid = np.linspace(0, 5, 2 * steps + 1)
    m = 32
    f2 = rng.normal(size=(2 * m, 2 * m)) + 0j
    ghat = rng.normal(size=(4 * m - 1, 4 * m - 1)) + 0j
    e = np.exp(1j * rng.normal(size=(m, 2 * m)))
    return {
        "laguerre_table": (40, rng.uniform(0, 30, 200_000)),
        "theta_sum": (rng.normal(size=2000) + 0j, 0.3 + 0.05j, 400),
        "rk4_linear": (1 + 0.2 * np.sin(tgrid), np.cos(tgrid), 1.0, 5.0 / steps,
                       np.array([[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]]), np.array([0.0, 0.0, 1.0])),
        "zero_count": (np.sin(np.linspace(0, 400, 1_000_000)), 1e-12, 1.0),
        "fourier_sum": (rng.normal(size=4000) + 0j, np.linspace(-20, 20, 4000), rng.uniform(-5, 5, 500)),
        "gaussian_fourier_sum": (np.array([0.5 + 0.002j, 0.1, 0.0]), 100.0, 20001, rng.uniform(-5, 5, 200)),
        "star_integral_sum": (f2, ghat, e, e, m),
        "star_path_rows": (af, ag, n // 2 - 1),
    }


def _best(fn, args, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    opts = ap.parse_args()
    if not K.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    cases = _cases(np.random.default_rng(opts.seed))
    print(f"{'kernel':22s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s} {'max diff':>10s}")
    for name, args in cases.items():
        fast, slow = K.NUMBA_KERNELS[name], K.NUMPY_KERNELS[name]
        fast(*args)
        t_fast, a = _best(fast, args, opts.repeat)
        t_slow, b = _best(slow, args, opts.repeat)
        diff = float(np.max(np.abs(np.asarray(a, dtype=complex) - np.asarray(b, dtype=complex))))
        print(f"{name:22s} {1e3 * t_slow:11.2f} {1e3 * t_fast:11.2f} {t_slow / t_fast:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
