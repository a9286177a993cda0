"""Time the compiled local-operator kernel against the numpy fallback.

Runs each backend on the groupings met in a chain Hamiltonian (two-site bond
on a doubly-terminated chain) and a full Hamiltonian application, for real
and complex vectors.

    python benchmarks/bench_kernels.py [--n 10] [--repeat 5]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from haldane_wire import kernels
from haldane_wire.chain import bond_matrix, build_hamiltonian, build_layout


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10, help="spin-1 sites")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = ["numpy", "auto"] + (["cython"] if kernels.BACKEND == "cython" else [])
    print(f"compiled extension: {'yes' if kernels.BACKEND == 'cython' else 'no'}")
    layout = build_layout(args.n, True, True)
    dims = layout.site_dims
    rng = np.random.default_rng(0)
    op = bond_matrix(0.0, 1.0)

    print(f"\nbond application, n_spin1={args.n} (dim {layout.dim})")
    print(f"{'dtype':8s} {'bond at':>8s} {'right dim':>10s} " + " ".join(f"{b:>10s}" for b in backends))
    for dtype in (np.float64, np.complex128):
        v = rng.standard_normal(layout.dim).astype(dtype)
        for pos in (1, layout.n_sites // 2, layout.n_sites - 3):
            left = math.prod(dims[:pos])
            right = math.prod(dims[pos + 2:])
            v3 = v.reshape(left, 9, right)
            out = np.zeros_like(v3)
            row = []
            for b in backends:
                row.append(best_of(lambda: kernels.accumulate_local(op, v3, out, backend=b), args.repeat))
            print(f"{np.dtype(dtype).name:8s} {pos:8d} {right:10d} " + " ".join(f"{t * 1e3:9.2f}ms" for t in row))

    print("\nfull Hamiltonian matvec")
    H = build_hamiltonian(layout, 0.0)
    v = rng.standard_normal(layout.dim)
    ref = H.apply(v, backend="numpy")
    for b in backends:
        t = best_of(lambda: H.apply(v, backend=b), args.repeat)
        err = np.abs(H.apply(v, backend=b) - ref).max()
        print(f"  {b:8s} {t * 1e3:9.2f}ms  max|diff vs numpy| = {err:.1e}")


if __name__ == "__main__":
    main()
