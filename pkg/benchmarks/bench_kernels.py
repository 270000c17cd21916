"""Time the numba and numpy variants of the hot kernels side by side.

    python3 benchmarks/bench_kernels.py [--elements 200000] [--repeat 5]

Each kernel runs once untimed (JIT warm-up), then ``--repeat`` times; the
best wall time is reported. Results of both variants are compared for
equality before timing.
"""
import argparse
import time

import numpy as np

from jumpfem import kernels
from jumpfem.coeff import CoefficientField
from jumpfem.mesh import rectangle_mesh, uniform_refine
from jumpfem.solve import assemble_cr


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def nvb_inputs(n_elements, rng):
    n = max(1, int(np.sqrt(n_elements / 2)))
    mesh = rectangle_mesh(0.0, 1.0, 0.0, 1.0, n, n)
    elem_edges = mesh.element_faces[:, [2, 0, 1]]
    marked = rng.random(mesh.n_faces) < 0.05
    return mesh, elem_edges, marked


def cr_system(n_elements):
    mesh = rectangle_mesh(0.0, 1.0, 0.0, 1.0, 4, 4)
    while mesh.n_elements < n_elements:
        mesh = uniform_refine(mesh)
    coeff = CoefficientField(mesh, {0: 1.0})
    return assemble_cr(mesh, coeff, lambda x, y: np.ones_like(x))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--elements", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)

    mesh, elem_edges, marked = nvb_inputs(args.elements, rng)
    closed = kernels.nvb_closure_numpy(elem_edges, marked)
    assert np.array_equal(closed, kernels.nvb_closure_numba(elem_edges, marked))
    new = np.flatnonzero(closed)
    midpoint = np.full(mesh.n_faces, -1, dtype=np.int64)
    midpoint[new] = mesh.n_vertices + np.arange(len(new))
    for a, b in zip(
        kernels.nvb_bisect_numpy(mesh.elements, elem_edges, midpoint),
        kernels.nvb_bisect_numba(mesh.elements, elem_edges, midpoint),
    ):
        assert np.array_equal(a, b)

    system = cr_system(args.elements)
    A, b = system.matrix, system.rhs
    x0 = np.zeros(len(b))
    max_iter = 20 * len(b)

    rows = []
    cases = [
        ("nvb_closure", mesh.n_elements,
         lambda: kernels.nvb_closure_numpy(elem_edges, marked),
         lambda: kernels.nvb_closure_numba(elem_edges, marked)),
        ("nvb_bisect", mesh.n_elements,
         lambda: kernels.nvb_bisect_numpy(mesh.elements, elem_edges, midpoint),
         lambda: kernels.nvb_bisect_numba(mesh.elements, elem_edges, midpoint)),
        ("pcg", len(b),
         lambda: kernels.pcg_numpy(A, b, x0, 1e-10, max_iter),
         lambda: kernels.pcg_numba(A, b, x0, 1e-10, max_iter)),
    ]
    for name, size, f_np, f_nb in cases:
        t_np = best_of(f_np, args.repeat)
        t_nb = best_of(f_nb, args.repeat)
        rows.append((name, size, t_np, t_nb))

    print(f"{'kernel':<12} {'size':>9} {'numpy [s]':>11} {'numba [s]':>11} {'speedup':>8}")
    for name, size, t_np, t_nb in rows:
        print(f"{name:<12} {size:>9d} {t_np:>11.4f} {t_nb:>11.4f} {t_np / t_nb:>8.2f}")


if __name__ == "__main__":
    main()
