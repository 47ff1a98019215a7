"""Compare the compiled and pure-Python kernels on a realistic system.

Usage::

    python3 benchmarks/bench_kernels.py [--n 48] [--repeat 5]

Times the three hot kernels (CSR matvec, block factorization, block solve)
plus one full reduced solve per backend, on the BDM1-P0 system of the unit
square at grid parameter ``n``.
"""
import argparse
import timeit

import numpy as np

from cosserat_msmfe import kernels
from cosserat_msmfe.assembly import assemble_system
from cosserat_msmfe.mesh import build_structured_square
from cosserat_msmfe.model import ManufacturedCase
from cosserat_msmfe.solve import CSROperator, SchurOperator, factor_block_diagonal, pcg


def best(fn, repeat, number=1):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench(n: int, repeat: int):
    system = assemble_system(build_structured_square(n), "BDM1-P0", ManufacturedCase(2), "MS-MFE")
    A_h, B = system.A, system.B
    x = np.random.default_rng(0).standard_normal(A_h.shape[0])
    print(f"BDM1-P0 n={n}: A_h {A_h.shape[0]} rows, nnz {A_h.nnz}; B {B.shape}")
    rows = {}
    for name in sorted(kernels.BACKENDS):
        op = CSROperator(B, name)
        xb = x[: B.shape[1]]
        f = factor_block_diagonal(A_h, name)
        S = SchurOperator(B, f, name)
        rhs = system.f

        def full():
            pcg(S, rhs, tol=1e-10, precond=1.0 / S.diagonal())

        rows[name] = {
            "matvec": best(lambda: op @ xb, repeat, number=50),
            "factor": best(lambda: factor_block_diagonal(A_h, name), repeat),
            "block solve": best(lambda: f.apply(x), repeat, number=20),
            "schur cg": best(full, max(1, repeat // 2)),
        }
    names = sorted(rows)
    print(f"{'kernel':<12}" + "".join(f"{k:>14}" for k in names)
          + ("     speedup" if len(names) == 2 else ""))
    for kernel in rows[names[0]]:
        times = [rows[k][kernel] for k in names]
        line = f"{kernel:<12}" + "".join(f"{t * 1e3:>12.3f}ms" for t in times)
        if len(names) == 2:
            # names sort as cython, python
            line += f"{times[1] / times[0]:>11.1f}x"
        print(line)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=48)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if "cython" not in kernels.BACKENDS:
        print("compiled backend not built; timing the fallback only")
    bench(args.n, args.repeat)


if __name__ == "__main__":
    main()
