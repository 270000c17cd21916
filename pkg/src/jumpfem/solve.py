"""Assembly of the CR and symmetric interior-penalty DG systems, and the
SPD solver."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .coeff import CoefficientField
from .quadrature import segment_rule, triangle_rule
from .spaces import (
    CrSpace,
    DgSpace,
    DiscreteField,
    eval_on_elements,
    eval_on_faces,
    face_means,
)

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


@dataclass
class SparseSpdSystem:
    """``matrix @ x = rhs`` over the free dofs of ``space``.

    ``lift`` holds the prescribed values of constrained dofs (zero for
    homogeneous Dirichlet data) in a full-length vector.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    lift: np.ndarray
    space: object

    def field(self, x) -> DiscreteField:
        c = self.lift.copy()
        c[self.free] = x
        return DiscreteField(self.space, c)


def default_gamma(degree: int) -> float:
    return 10.0 * (degree + 1) ** 2


def _coo(rows, cols, vals, n):
    return sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()


def _load(space, f, quad_degree):
    mesh = space.mesh
    rule = triangle_rule(quad_degree)
    val, _ = space.local_basis(rule.points)
    fv = eval_on_elements(f, mesh, rule.points)
    local = 2.0 * mesh.areas[:, None] * ((fv * rule.weights) @ val)
    return np.bincount(
        space.element_dofs().ravel(), weights=local.ravel(), minlength=space.ndof
    )


# ----------------------------------------------------------------------------
# Crouzeix-Raviart
# ----------------------------------------------------------------------------


def cr_stiffness(mesh, coeff: CoefficientField) -> sp.csr_matrix:
    G = np.einsum("kid,kjd->kij", mesh.grad_lambda, mesh.grad_lambda)
    local = 4.0 * (coeff.alpha * mesh.areas)[:, None, None] * G
    dofs = mesh.element_faces
    rows = np.repeat(dofs[:, :, None], 3, axis=2)
    cols = np.repeat(dofs[:, None, :], 3, axis=1)
    return _coo(rows, cols, local, mesh.n_faces)


def assemble_cr(mesh, coeff: CoefficientField, f, quad_degree: int = 4, dirichlet=None):
    """CR system with boundary face dofs eliminated.

    ``dirichlet`` (optional) gives boundary values; its face means become the
    constrained dofs. Otherwise they are zero.
    """
    space = CrSpace(mesh)
    A = cr_stiffness(mesh, coeff)
    b = _load(space, f, quad_degree)
    free = space.free
    fixed = space.constrained
    lift = np.zeros(space.ndof)
    if dirichlet is not None:
        lift[fixed] = face_means(dirichlet, mesh, quad_degree)[fixed]
    rhs = b[free] - A[free][:, fixed] @ lift[fixed]
    return SparseSpdSystem(A[free][:, free].tocsr(), rhs, free, lift, space)


# ----------------------------------------------------------------------------
# symmetric interior penalty DG
# ----------------------------------------------------------------------------


def _side_basis(space, faces, side, s):
    """Basis values and normal derivatives on faces from one side:
    ``(nF, nq, n)`` each."""
    mesh = space.mesh
    K = mesh.face_elements[faces, side]
    bary = mesh.face_bary(s, side, faces)
    val, der = space.local_basis(bary.reshape(-1, 3))
    nq = len(s)
    val = val.reshape(len(faces), nq, -1)
    der = der.reshape(len(faces), nq, val.shape[2], 3)
    grad = np.einsum("fqnj,fjd->fqnd", der, mesh.grad_lambda[K])
    dn = np.einsum("fqnd,fd->fqn", grad, mesh.normals[faces])
    return val, dn


def dg_matrix(space: DgSpace, coeff: CoefficientField, gamma: float) -> sp.csr_matrix:
    mesh = space.mesh
    k = space.degree
    n = space.n_local
    dofs = space.element_dofs()

    rule = triangle_rule(max(2 * k - 2, 0))
    _, der = space.local_basis(rule.points)
    grads = np.einsum("qnj,kjd->kqnd", der, mesh.grad_lambda)
    vol = 2.0 * (coeff.alpha * mesh.areas)[:, None, None] * np.einsum(
        "q,kqid,kqjd->kij", rule.weights, grads, grads
    )
    rows = [np.repeat(dofs[:, :, None], n, axis=2)]
    cols = [np.repeat(dofs[:, None, :], n, axis=1)]
    vals = [vol]

    srule = segment_rule(2 * k)
    s, w = srule.points, srule.weights
    hF = mesh.face_length

    fi = mesh.interior_faces
    vm, dm = _side_basis(space, fi, 0, s)
    vp, dp = _side_basis(space, fi, 1, s)
    J = np.concatenate([vm, -vp], axis=2)
    Avg = np.concatenate(
        [
            (coeff.w_minus * coeff.alpha_minus)[fi, None, None] * dm,
            (coeff.w_plus * coeff.alpha_plus)[fi, None, None] * dp,
        ],
        axis=2,
    )
    sigma = gamma * coeff.alpha_h[fi] / hF[fi]
    wq = w[None, :] * hF[fi, None]
    blk = (
        np.einsum("fq,fqi,fqj->fij", wq * sigma[:, None], J, J)
        - np.einsum("fq,fqi,fqj->fij", wq, J, Avg)
        - np.einsum("fq,fqi,fqj->fij", wq, Avg, J)
    )
    fd = np.concatenate(
        [dofs[mesh.face_elements[fi, 0]], dofs[mesh.face_elements[fi, 1]]], axis=1
    )
    rows.append(np.repeat(fd[:, :, None], 2 * n, axis=2))
    cols.append(np.repeat(fd[:, None, :], 2 * n, axis=1))
    vals.append(blk)

    fb = mesh.boundary_faces
    vb, db = _side_basis(space, fb, 0, s)
    Ab = coeff.alpha_minus[fb, None, None] * db
    sigma = gamma * coeff.alpha_h[fb] / hF[fb]
    wq = w[None, :] * hF[fb, None]
    blk = (
        np.einsum("fq,fqi,fqj->fij", wq * sigma[:, None], vb, vb)
        - np.einsum("fq,fqi,fqj->fij", wq, vb, Ab)
        - np.einsum("fq,fqi,fqj->fij", wq, Ab, vb)
    )
    bd = dofs[mesh.face_elements[fb, 0]]
    rows.append(np.repeat(bd[:, :, None], n, axis=2))
    cols.append(np.repeat(bd[:, None, :], n, axis=1))
    vals.append(blk)

    return _coo(
        np.concatenate([r.ravel() for r in rows]),
        np.concatenate([c.ravel() for c in cols]),
        np.concatenate([v.ravel() for v in vals]),
        space.ndof,
    )


def assemble_dg(
    mesh,
    coeff: CoefficientField,
    f,
    degree: int = 1,
    gamma: float | None = None,
    quad_degree: int | None = None,
    dirichlet=None,
):
    """Symmetric interior-penalty system with harmonic weights; boundary
    data enter weakly through the boundary face terms."""
    if degree not in (1, 2):
        raise ValueError(f"unsupported DG degree {degree}; expected 1 or 2")
    gamma = default_gamma(degree) if gamma is None else float(gamma)
    if not gamma > 0:
        raise ValueError("penalty parameter gamma must be positive")
    quad_degree = 2 * degree + 2 if quad_degree is None else quad_degree
    space = DgSpace(mesh, degree)
    A = dg_matrix(space, coeff, gamma)
    b = _load(space, f, quad_degree)
    if dirichlet is not None:
        fb = mesh.boundary_faces
        srule = segment_rule(max(quad_degree, 2 * degree))
        vb, db = _side_basis(space, fb, 0, srule.points)
        g = eval_on_faces(dirichlet, mesh, srule.points, 0, fb)
        hF = mesh.face_length[fb]
        sigma = gamma * coeff.alpha_h[fb] / hF
        wq = srule.weights[None, :] * hF[:, None] * g
        local = np.einsum("fq,fqi->fi", wq * sigma[:, None], vb) - np.einsum(
            "fq,fqi->fi", wq * coeff.alpha_minus[fb, None], db
        )
        bd = space.element_dofs()[mesh.face_elements[fb, 0]]
        b += np.bincount(bd.ravel(), weights=local.ravel(), minlength=space.ndof)
    free = np.arange(space.ndof)
    return SparseSpdSystem(A, b, free, np.zeros(space.ndof), space)


# ----------------------------------------------------------------------------
# solvers
# ----------------------------------------------------------------------------


def solve_spd(system, tol: float = 1e-10, max_iter: int | None = None, x0=None):
    """Jacobi-preconditioned CG. Accepts a :class:`SparseSpdSystem` or a
    ``(matrix, rhs)`` pair and returns the solution vector over free dofs."""
    if isinstance(system, SparseSpdSystem):
        A, b = system.matrix, system.rhs
    else:
        A, b = system
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = len(b)
    if n == 0:
        return np.zeros(0)
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise SolverError(
            "matrix not SPD: nonpositive diagonal entry "
            "(indefinite system; increase gamma for DG)"
        )
    max_iter = max(100, 20 * n) if max_iter is None else max_iter
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    x, it, res, status = kernels.pcg(A, b, x0, tol, max_iter)
    if status == 2:
        raise SolverError(
            f"matrix not SPD: CG breakdown at iteration {it} "
            "(indefinite system; increase gamma for DG)"
        )
    if status == 1:
        raise SolverError(f"no convergence within {max_iter} iterations (residual {res:.3e})")
    log.debug("pcg: n=%d iterations=%d residual=%.2e", n, it, res)
    return x


def solve_direct(system) -> np.ndarray:
    """Dense Cholesky solve, for small systems and as a test oracle."""
    if isinstance(system, SparseSpdSystem):
        A, b = system.matrix, system.rhs
    else:
        A, b = system
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    try:
        c = scipy.linalg.cho_factor(A)
    except np.linalg.LinAlgError as exc:
        raise SolverError("matrix not SPD: Cholesky factorization failed") from exc
    return scipy.linalg.cho_solve(c, np.asarray(b, dtype=float))


def solve_sparse_direct(system) -> np.ndarray:
    """Sparse LU (SuperLU, COLAMD ordering). Used for reference solutions on
    strongly graded meshes where Jacobi CG needs many iterations."""
    if isinstance(system, SparseSpdSystem):
        A, b = system.matrix, system.rhs
    else:
        A, b = system
    b = np.asarray(b, dtype=float)
    if len(b) == 0:
        return np.zeros(0)
    try:
        lu = spla.splu(sp.csc_matrix(A), permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SolverError(f"sparse factorization failed: {exc}") from exc
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SolverError("sparse factorization produced non-finite values")
    return x


def solve_field(system, tol: float = 1e-10, max_iter: int | None = None) -> DiscreteField:
    return system.field(solve_spd(system, tol, max_iter))
