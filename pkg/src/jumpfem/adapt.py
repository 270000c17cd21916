"""Dörfler marking and the solve-estimate-mark-refine driver."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .coeff import CoefficientField
from .estimate import (
    ErrorReport,
    IndicatorReport,
    error_report,
    estimate,
    jump_seminorm,
)
from .mesh import Mesh, refine, uniform_refine
from .problems import ProblemSpec
from .quadrature import triangle_rule
from .solve import SolverError, assemble_cr, assemble_dg, default_gamma, solve_sparse_direct, solve_spd
from .spaces import DiscreteField

log = logging.getLogger(__name__)


def dorfler_mark(indicators, theta: float = 0.5) -> np.ndarray:
    """Smallest greedy set carrying a fraction ``theta`` of ``sum eta_K^2``.

    Elements are taken in order of decreasing ``eta_K`` (lower index first on
    ties). Returns sorted element indices.
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0, 1]")
    eta2 = np.asarray(indicators, dtype=float) ** 2
    if np.any(eta2 < 0) or not np.all(np.isfinite(eta2)):
        raise ValueError("indicators must be finite")
    order = np.argsort(-eta2, kind="stable")
    csum = np.cumsum(eta2[order])
    if len(csum) == 0 or csum[-1] == 0.0:
        return np.zeros(0, dtype=np.int64)
    n = int(np.searchsorted(csum, theta * csum[-1], side="left")) + 1
    return np.sort(order[:n])


@dataclass
class AdaptParams:
    method: str = "cr"
    degree: int = 1
    gamma: float | None = None
    theta: float = 0.5
    max_dofs: int = 100_000
    quad_degree: int = 10
    solver_tol: float = 1e-10
    refine: str = "adaptive"
    error_mode: str = "auto"  # auto | exact | reference | none
    # measure errors only once ndof has grown by this factor since the last
    # measurement (the final level is always measured)
    error_growth: float = 1.0
    solver: str = "cg"  # cg | direct

    def __post_init__(self):
        if self.method not in ("cr", "dg"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "dg" and self.degree not in (1, 2):
            raise ValueError("DG degree must be 1 or 2")
        if self.refine not in ("uniform", "adaptive"):
            raise ValueError(f"unknown refinement mode {self.refine!r}")
        if self.error_mode not in ("auto", "exact", "reference", "none"):
            raise ValueError(f"unknown error mode {self.error_mode!r}")
        if self.solver not in ("cg", "direct"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.error_growth < 1.0:
            raise ValueError("error_growth must be >= 1")
        if self.gamma is None:
            self.gamma = default_gamma(self.degree if self.method == "dg" else 1)


@dataclass
class LevelRecord:
    level: int
    ndof: int
    n_elements: int
    h_max: float
    eta: float
    eta_r: float
    eta_jn: float
    eta_ju: float
    osc: float
    energy_err: float | None
    dg_err: float | None
    effectivity: float | None
    seconds: float
    n_marked: int = 0


@dataclass
class AdaptiveRunRecord:
    problem: str
    params: AdaptParams
    levels: list = field(default_factory=list)
    mesh: Mesh | None = None
    solution: DiscreteField | None = None
    report: IndicatorReport | None = None
    errors: ErrorReport | None = None
    coeff: CoefficientField | None = None
    marked: list = field(default_factory=list)

    @property
    def ndofs(self) -> np.ndarray:
        return np.array([lv.ndof for lv in self.levels])

    def column(self, name) -> np.ndarray:
        return np.array([np.nan if getattr(lv, name) is None else getattr(lv, name) for lv in self.levels])


def discretize(mesh, coeff, problem: ProblemSpec, params: AdaptParams, tol=None, solver=None):
    """Assemble and solve; returns the discrete solution and its dof count."""
    tol = params.solver_tol if tol is None else tol
    solver = params.solver if solver is None else solver
    if params.method == "cr":
        system = assemble_cr(mesh, coeff, problem.f, 4, dirichlet=problem.dirichlet)
    else:
        system = assemble_dg(
            mesh,
            coeff,
            problem.f,
            params.degree,
            params.gamma,
            2 * params.degree + 2,
            dirichlet=problem.dirichlet,
        )
    x = solve_sparse_direct(system) if solver == "direct" else solve_spd(system, tol)
    return system.field(x), len(system.rhs)


def reference_energy_error(u_h: DiscreteField, u_ref: DiscreteField, ancestors, coeff_ref, quad_degree=4):
    """``||alpha^{1/2} grad_h (u_ref - u_h)||`` on the (nested) reference mesh.

    ``ancestors[j]`` is the element of ``u_h``'s mesh containing reference
    element ``j``.
    """
    fine = u_ref.mesh
    coarse = u_h.mesh
    rule = triangle_rule(quad_degree)
    xy = fine.map_points(rule.points)
    c = coarse.centroids[ancestors]
    gl = coarse.grad_lambda[ancestors]
    bary = 1.0 / 3.0 + np.einsum("kid,kqd->kqi", gl, xy - c[:, None, :])
    g_h = u_h.gradients(bary, ancestors)
    d = u_ref.gradients(rule.points) - g_h
    e2 = coeff_ref.alpha * 2.0 * fine.areas * (np.sum(d**2, -1) @ rule.weights)
    return float(np.sqrt(e2.sum()))


def _reference_errors(mesh, u_h, coeff, problem, params, extra=2):
    fine = mesh
    anc = np.arange(mesh.n_elements)
    for _ in range(extra):
        fine = uniform_refine(fine)
        anc = anc[fine.parent]
    cf = coeff.rebind(fine)
    u_ref, _ = discretize(fine, cf, problem, params, solver="direct")
    energy = reference_energy_error(u_h, u_ref, anc, cf, max(2 * params.degree, 2))
    jump = jump_seminorm(u_h, coeff, problem.dirichlet)
    return energy, float(np.hypot(energy, jump))


def run_adaptive(problem: ProblemSpec, params: AdaptParams | None = None, mesh: Mesh | None = None):
    """Solve, estimate and refine until the next mesh exceeds ``max_dofs``."""
    params = AdaptParams() if params is None else params
    mesh = problem.make_mesh() if mesh is None else mesh
    mode = params.error_mode
    if mode == "auto":
        mode = "exact" if problem.has_exact else "none"
    if mode == "exact" and not problem.has_exact:
        raise ValueError(f"problem {problem.name!r} has no exact solution")

    rec = AdaptiveRunRecord(problem.name, params)
    level = 0
    measured = None
    while True:
        t0 = time.perf_counter()
        coeff = CoefficientField(mesh, problem.alpha)
        try:
            u_h, ndof = discretize(mesh, coeff, problem, params)
        except SolverError as exc:
            raise SolverError(f"level {level} ({mesh.n_elements} elements): {exc}") from exc
        report = estimate(u_h, coeff, problem.f, params.quad_degree, problem.dirichlet)

        if params.refine == "uniform":
            marked = np.arange(mesh.n_elements)
            nxt = uniform_refine(mesh)
        else:
            marked = dorfler_mark(report.eta_K, params.theta)
            nxt = refine(mesh, marked)
        last = _ndof(nxt, params) > params.max_dofs or len(marked) == 0

        errs = None
        energy = dg = eff = None
        due = last or measured is None or ndof >= params.error_growth * measured
        if mode == "exact" and due:
            errs = error_report(problem.grad_u, u_h, coeff, params.quad_degree, problem.dirichlet)
            energy, dg = errs.energy, errs.dg
        elif mode == "reference" and due:
            energy, dg = _reference_errors(mesh, u_h, coeff, problem, params)
        if energy is not None:
            measured = ndof
            ref = energy if params.method == "cr" else dg
            eff = report.eta / ref if ref > 0 else float("inf")
        seconds = time.perf_counter() - t0

        rec.levels.append(
            LevelRecord(
                level=level,
                ndof=ndof,
                n_elements=mesh.n_elements,
                h_max=float(mesh.diameters.max()),
                eta=report.eta,
                eta_r=report.eta_r,
                eta_jn=report.eta_jn,
                eta_ju=report.eta_ju,
                osc=report.osc,
                energy_err=energy,
                dg_err=dg,
                effectivity=eff,
                seconds=seconds,
                n_marked=len(marked),
            )
        )
        rec.mesh, rec.solution, rec.report, rec.errors, rec.coeff = mesh, u_h, report, errs, coeff
        log.info(
            "level %d: ndof=%d eta=%.4e err=%s (%.2fs)",
            level,
            ndof,
            report.eta,
            "-" if energy is None else f"{energy:.4e}",
            seconds,
        )
        if last:
            break
        rec.marked.append(marked)
        mesh = nxt
        level += 1
    return rec


def _ndof(mesh: Mesh, params: AdaptParams) -> int:
    if params.method == "cr":
        return len(mesh.interior_faces)
    return mesh.n_elements * (params.degree + 1) * (params.degree + 2) // 2


def observed_rate(ndof, err) -> float:
    """Least-squares slope ``s`` of ``err ~ ndof^s``."""
    ndof = np.asarray(ndof, dtype=float)
    err = np.asarray(err, dtype=float)
    return float(np.polyfit(np.log(ndof), np.log(err), 1)[0])
