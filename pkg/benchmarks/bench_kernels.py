"""Time the compiled and NumPy kernel backends on a full solver step.

Usage::

    python3 benchmarks/bench_kernels.py --n 128 256 --steps 200
"""

import argparse
import time

import numpy as np

from nncda import kernels
from nncda.solver import Stepper, make_forcing
from nncda.spectral import make_grid, random_field


def time_backend(n: int, steps: int, backend: str) -> float:
    g = make_grid(n, 2 * np.pi)
    f = make_forcing(g, 0, 2, max(3, n // 8), 100.0, 0.01)
    st = Stepper(g, 0.01, 1e-3, f, backend=backend)
    psi = np.ascontiguousarray(random_field(g, np.random.default_rng(0), slope=3.0, dealiased=True).coeffs)
    w = -g.ksq * psi
    w, psi = st.advance(w, psi)  # warm-up
    t0 = time.perf_counter()
    for _ in range(steps):
        w, psi = st.advance(w, psi)
    return (time.perf_counter() - t0) / steps


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--steps", type=int, default=200)
    args = ap.parse_args()
    backends = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    print(f"{'n':>6}" + "".join(f"{b + ' ms/step':>20}" for b in backends) + f"{'speed-up':>12}")
    for n in args.n:
        ms = [1e3 * time_backend(n, args.steps, b) for b in backends]
        ratio = f"{ms[0] / ms[1]:.2f}x" if len(ms) == 2 else "-"
        print(f"{n:>6}" + "".join(f"{m:>20.3f}" for m in ms) + f"{ratio:>12}")


if __name__ == "__main__":
    main()
