"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported side by side, so the MAXENT_DISABLE_NUMBA flag
does not matter here. First calls are made before timing so compilation is
left out; results are also checked to agree.
"""

import argparse
import time

import numpy as np

from maxent_hierarchy import _kernels


def best_of(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    x = np.sort(rng.uniform(-1, 1, 1024))
    phi = _kernels.numpy_kernels.chebyshev_matrix(x, 30)
    theta = rng.normal(scale=0.1, size=30)
    mu = phi.mean(axis=0)
    w = rng.random(1024)
    w /= w.sum()
    t = np.linspace(0, 10, 501)
    return {
        "hamiltonian L=10": (10, 0.9, 0.75, 1.0, True),
        "chebyshev_matrix D=1024 n=30": (x, 30),
        "dual_terms D=1024 n=30": (phi, theta, mu),
        "characteristic D=1024 T=501": (w, x, t),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels.numba_kernels is None:
        raise SystemExit("numba is not installed")

    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for label, call_args in cases(rng).items():
        name = label.split()[0]
        np_fn = getattr(_kernels.numpy_kernels, name)
        nb_fn = getattr(_kernels.numba_kernels, name)
        a, b = np_fn(*call_args), nb_fn(*call_args)
        a, b = (a, b) if isinstance(a, tuple) else ((a,), (b,))
        for u, v in zip(a, b):
            np.testing.assert_allclose(u, v, rtol=1e-9, atol=1e-12)
        t_np = best_of(np_fn, call_args, args.repeat)
        t_nb = best_of(nb_fn, call_args, args.repeat)
        print(f"{label:32s} {1e3 * t_np:11.3f} {1e3 * t_nb:11.3f} {t_np / t_nb:8.2f}")


if __name__ == "__main__":
    main()
