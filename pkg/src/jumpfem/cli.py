"""Command line driver: ``jumpfem --problem NAME [options]``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import problems
from .adapt import AdaptParams, run_adaptive
from .io import run_fields, write_csv, emit_vtk
from .mesh import read_mesh


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="jumpfem",
        description="Adaptive CR / interior-penalty DG runs with coefficient-robust residual estimators.",
    )
    p.add_argument("--problem", default="interface_manufactured", choices=problems.catalog())
    p.add_argument("--jump-ratio", type=float, default=None, help="coefficient ratio k (where applicable)")
    p.add_argument("--method", choices=("cr", "dg"), default="cr")
    p.add_argument("--degree", type=int, choices=(1, 2), default=1, help="DG polynomial degree")
    p.add_argument("--gamma", type=float, default=None, help="DG penalty (default 10 (k+1)^2)")
    p.add_argument("--theta", type=float, default=0.5, help="Dörfler bulk parameter")
    p.add_argument("--refine", choices=("uniform", "adaptive"), default="adaptive")
    p.add_argument("--max-dofs", type=int, default=100_000)
    p.add_argument("--quad-degree", type=int, default=10, help="quadrature degree for errors and indicators")
    p.add_argument("--solver-tol", type=float, default=1e-10)
    p.add_argument("--solver", choices=("cg", "direct"), default="cg",
                   help="linear solver: Jacobi CG (default) or sparse LU")
    p.add_argument("--reference-proxy", action="store_true",
                   help="measure errors against a solution on the twice uniformly refined mesh")
    p.add_argument("--out-csv", default="-", help="CSV path ('-' for stdout)")
    p.add_argument("--out-vtk", default=None, help="VTK file for the finest level")
    p.add_argument("--mesh", default=None, help="initial mesh in the vertices/triangles text format")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        problem = problems.get_problem(args.problem, args.jump_ratio)
        params = AdaptParams(
            method=args.method,
            degree=args.degree,
            gamma=args.gamma,
            theta=args.theta,
            max_dofs=args.max_dofs,
            quad_degree=args.quad_degree,
            solver_tol=args.solver_tol,
            refine=args.refine,
            error_mode="reference" if args.reference_proxy else "auto",
            solver=args.solver,
        )
        mesh = read_mesh(args.mesh) if args.mesh else None
        if mesh is not None:
            missing = set(mesh.subdomain.tolist()) - set(problem.alpha)
            if missing:
                raise ValueError(f"mesh uses subdomain ids {sorted(missing)} unknown to {problem.name}")
        record = run_adaptive(problem, params, mesh)
        write_csv(record, args.out_csv)
        if args.out_vtk:
            emit_vtk(record.mesh, run_fields(record), args.out_vtk, title=problem.description)
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"jumpfem: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
