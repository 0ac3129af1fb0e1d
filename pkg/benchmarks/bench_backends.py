"""Compare the compiled and pure-Python kernels.

    python3 benchmarks/bench_backends.py [--n 512] [--repeat 5]

Times a Thomas solve, a low-rank CG solve and a full stabilized step for each
available backend and prints the speedup.
"""

import argparse
import timeit

import numpy as np

from chevron import _backend
from chevron.control import build_mode_basis, plan_zero_stabilization
from chevron.discretization import coefficients, laplacian, system_matrices
from chevron.linalg import DirectSolver, LowRankUpdatedOperator, solve_cg, solve_tridiagonal
from chevron.model import Grid1D, InitialSpec, Parameters1D, initial_condition
from chevron.stepper import step_free, step_stabilized


def cases(n):
    p = Parameters1D(1.0, 1.0, 0.1, 100.0)
    g = Grid1D.from_length(100.0, n, 0.1)
    s = initial_condition(InitialSpec("oscillatory", seed=0, amplitude=0.25), g)
    plan = plan_zero_stabilization(s, g)
    basis = build_mode_basis(g, plan.k_modes, plan.mu)
    mats = system_matrices(laplacian(g), coefficients(s, p), p, g)
    op = LowRankUpdatedOperator(mats.m_a, basis.vectors, basis.mu * g.dt / p.tau)
    rhs = np.ascontiguousarray(mats.l_a_diag * s.a_int.real)
    solver = DirectSolver()
    return {
        "thomas": lambda: solve_tridiagonal(mats.m_a, rhs),
        f"lowrank cg (K={plan.k_modes})": lambda: solve_cg(op, rhs, tol=1e-10),
        "free step": lambda: step_free(s, p, g, solver),
        "stabilized step": lambda: step_stabilized(s, p, g, basis, solver),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--n", type=int, default=512)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    timings = {}
    for name in _backend.available():
        prev = _backend.use_backend(name)
        try:
            for label, fn in cases(args.n).items():
                loops, _ = timeit.Timer(fn).autorange()
                best = min(timeit.repeat(fn, number=loops, repeat=args.repeat)) / loops
                timings.setdefault(label, {})[name] = best
        finally:
            _backend.use_backend(prev)

    names = _backend.available()
    print(f"n = {args.n}")
    print(f"{'case':<24}" + "".join(f"{nm:>14}" for nm in names) + ("     speedup" if len(names) > 1 else ""))
    for label, row in timings.items():
        line = f"{label:<24}" + "".join(f"{row[nm] * 1e6:>11.1f} us" for nm in names)
        if len(names) > 1:
            line += f"{row['python'] / row['compiled']:>11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
