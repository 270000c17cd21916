"""Crouzeix-Raviart and discontinuous P_k spaces, fields and projections.

User functions are called as ``fn(x, y)`` or ``fn(x, y, subdomain)``; the
three-argument form receives the subdomain id of the element the points
belong to, which is how piecewise-defined data (interface solutions) are
evaluated from the correct side of an interface.
"""
from __future__ import annotations

import inspect
from dataclasses import dataclass

import numpy as np

from .mesh import Mesh
from .quadrature import segment_rule, triangle_rule

# ----------------------------------------------------------------------------
# reference bases in barycentric coordinates
# ----------------------------------------------------------------------------

_P2_EDGES = ((1, 2), (2, 0), (0, 1))


def n_local(k: int) -> int:
    return (k + 1) * (k + 2) // 2


def _lagrange(k: int, bary: np.ndarray):
    """Values ``(nq, n)`` and barycentric derivatives ``(nq, n, 3)``."""
    bary = np.atleast_2d(bary)
    nq = len(bary)
    if k == 0:
        return np.ones((nq, 1)), np.zeros((nq, 1, 3))
    if k == 1:
        return bary.copy(), np.broadcast_to(np.eye(3), (nq, 3, 3)).copy()
    if k == 2:
        val = np.empty((nq, 6), dtype=bary.dtype)
        der = np.zeros((nq, 6, 3), dtype=bary.dtype)
        for i in range(3):
            li = bary[:, i]
            val[:, i] = li * (2.0 * li - 1.0)
            der[:, i, i] = 4.0 * li - 1.0
        for e, (i, j) in enumerate(_P2_EDGES):
            val[:, 3 + e] = 4.0 * bary[:, i] * bary[:, j]
            der[:, 3 + e, i] = 4.0 * bary[:, j]
            der[:, 3 + e, j] = 4.0 * bary[:, i]
        return val, der
    raise ValueError(f"unsupported polynomial degree {k}")


def _laplacian_p2(grad_lambda: np.ndarray) -> np.ndarray:
    """Constant Laplacian of each P2 basis function, shape ``(nt, 6)``."""
    G = np.einsum("kid,kjd->kij", grad_lambda, grad_lambda)
    out = np.empty((len(grad_lambda), 6))
    for i in range(3):
        out[:, i] = 4.0 * G[:, i, i]
    for e, (i, j) in enumerate(_P2_EDGES):
        out[:, 3 + e] = 8.0 * G[:, i, j]
    return out


def cr_basis_eval(mesh: Mesh, element: int, bary):
    """Values ``1 - 2*lambda_i`` of the three face functions of ``element``
    (local face ``i`` opposite vertex ``i``) and their constant gradients."""
    bary = np.asarray(bary, dtype=float)
    return 1.0 - 2.0 * bary, -2.0 * mesh.grad_lambda[element]


def dg_basis_eval(mesh: Mesh, element: int, degree: int, bary):
    """Lagrange P_k values and gradients on one element (k in {1, 2})."""
    if degree not in (1, 2):
        raise ValueError(f"unsupported DG degree {degree}; expected 1 or 2")
    val, der = _lagrange(degree, np.atleast_2d(np.asarray(bary, dtype=float)))
    grads = np.einsum("qnj,jd->qnd", der, mesh.grad_lambda[element])
    if np.ndim(bary) == 1:
        return val[0], grads[0]
    return val, grads


# ----------------------------------------------------------------------------
# spaces
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CrSpace:
    mesh: Mesh

    kind = "cr"
    degree = 1

    @property
    def ndof(self) -> int:
        return self.mesh.n_faces

    @property
    def constrained(self) -> np.ndarray:
        return self.mesh.boundary_faces

    @property
    def free(self) -> np.ndarray:
        return self.mesh.interior_faces

    def element_dofs(self) -> np.ndarray:
        return self.mesh.element_faces

    def local_basis(self, bary):
        bary = np.atleast_2d(bary)
        return 1.0 - 2.0 * bary, np.broadcast_to(-2.0 * np.eye(3), (len(bary), 3, 3))


@dataclass(frozen=True, eq=False)
class DgSpace:
    mesh: Mesh
    degree: int = 1

    kind = "dg"

    def __post_init__(self):
        if self.degree not in (0, 1, 2):
            raise ValueError(f"unsupported DG degree {self.degree}")

    @property
    def n_local(self) -> int:
        return n_local(self.degree)

    @property
    def ndof(self) -> int:
        return self.mesh.n_elements * self.n_local

    def element_dofs(self) -> np.ndarray:
        return np.arange(self.ndof).reshape(self.mesh.n_elements, self.n_local)

    def local_basis(self, bary):
        return _lagrange(self.degree, bary)


# ----------------------------------------------------------------------------
# fields
# ----------------------------------------------------------------------------


class DiscreteField:
    """Coefficient vector over a CR or DG space."""

    def __init__(self, space, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (space.ndof,):
            raise ValueError(f"expected {space.ndof} coefficients, got {coeffs.shape}")
        self.space = space
        self.coeffs = coeffs

    @property
    def mesh(self) -> Mesh:
        return self.space.mesh

    def __mul__(self, c):
        return DiscreteField(self.space, self.coeffs * c)

    __rmul__ = __mul__

    def __add__(self, other):
        a, b = self.space, other.space
        if a.kind != b.kind or a.mesh is not b.mesh or a.degree != b.degree:
            raise ValueError("fields live on different spaces")
        return DiscreteField(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return self + (-1.0) * other

    def local_coeffs(self, elems=None) -> np.ndarray:
        c = self.coeffs[self.space.element_dofs()]
        return c if elems is None else c[elems]

    def values(self, bary, elems=None) -> np.ndarray:
        """Values at barycentric points: ``(nK, nq)`` for shared points
        ``(nq, 3)``, or per-element points ``(nK, nq, 3)``."""
        c = self.local_coeffs(elems)
        bary = np.asarray(bary)
        if bary.ndim == 3:
            val, _ = self.space.local_basis(bary.reshape(-1, 3))
            val = val.reshape(bary.shape[0], bary.shape[1], -1)
            return np.einsum("kqn,kn->kq", val, c)
        val, _ = self.space.local_basis(bary)
        return c @ val.T

    def gradients(self, bary, elems=None) -> np.ndarray:
        """Broken gradient at barycentric points, shape ``(nK, nq, 2)``."""
        c = self.local_coeffs(elems)
        gl = self.mesh.grad_lambda if elems is None else self.mesh.grad_lambda[elems]
        bary = np.asarray(bary)
        if bary.ndim == 3:
            _, der = self.space.local_basis(bary.reshape(-1, 3))
            der = der.reshape(bary.shape[0], bary.shape[1], -1, 3)
            return np.einsum("kqnj,kn,kjd->kqd", der, c, gl)
        _, der = self.space.local_basis(bary)
        return np.einsum("qnj,kn,kjd->kqd", der, c, gl)

    def laplacian(self) -> np.ndarray:
        """Elementwise (constant) Laplacian; zero for degree <= 1."""
        if self.space.kind == "cr" or self.space.degree <= 1:
            return np.zeros(self.mesh.n_elements)
        return np.einsum("kn,kn->k", _laplacian_p2(self.mesh.grad_lambda), self.local_coeffs())

    def face_traces(self, s, side: int, faces=None):
        """Trace values and gradients at segment points ``s`` seen from
        ``K-`` (``side=0``) or ``K+`` (``side=1``).

        Returns ``(values (nF, nq), gradients (nF, nq, 2))``; rows for a
        missing ``K+`` are zero.
        """
        mesh = self.mesh
        faces = np.arange(mesh.n_faces) if faces is None else np.asarray(faces)
        s = np.asarray(s, dtype=float)
        K = mesh.face_elements[faces, side]
        ok = K >= 0
        vals = np.zeros((len(faces), len(s)))
        grads = np.zeros((len(faces), len(s), 2))
        if ok.any():
            bary = mesh.face_bary(s, side, faces[ok])
            vals[ok] = self.values(bary, K[ok])
            grads[ok] = self.gradients(bary, K[ok])
        return vals, grads


# ----------------------------------------------------------------------------
# evaluating user functions
# ----------------------------------------------------------------------------


def _arity(fn) -> int:
    try:
        params = inspect.signature(fn).parameters.values()
    except (TypeError, ValueError):
        return 2
    pos = [p for p in params if p.kind in (p.POSITIONAL_ONLY, p.POSITIONAL_OR_KEYWORD)]
    if any(p.kind == p.VAR_POSITIONAL for p in params):
        return 3
    return 3 if len(pos) >= 3 else 2


def evaluate(fn, x, y, sub):
    """Evaluate a user function, broadcasting scalar results."""
    out = fn(x, y, sub) if _arity(fn) == 3 else fn(x, y)
    return np.broadcast_to(np.asarray(out, dtype=float), np.shape(x))


def eval_on_elements(fn, mesh: Mesh, bary, elems=None) -> np.ndarray:
    """``fn`` at barycentric points of each element, shape ``(nK, nq)``."""
    xy = mesh.map_points(bary, elems)
    sub = mesh.subdomain if elems is None else mesh.subdomain[elems]
    return evaluate(fn, xy[..., 0], xy[..., 1], np.broadcast_to(sub[:, None], xy.shape[:2]))


def eval_on_faces(fn, mesh: Mesh, s, side: int = 0, faces=None) -> np.ndarray:
    """``fn`` at segment points of each face, evaluated with the subdomain
    of the element on ``side``."""
    faces = np.arange(mesh.n_faces) if faces is None else np.asarray(faces)
    xy = mesh.face_points(np.asarray(s, dtype=float), faces)
    K = mesh.face_elements[faces, side]
    sub = mesh.subdomain[np.where(K >= 0, K, mesh.face_elements[faces, 0])]
    return evaluate(fn, xy[..., 0], xy[..., 1], np.broadcast_to(sub[:, None], xy.shape[:2]))


def integrate(fn, mesh: Mesh, degree: int = 10) -> float:
    rule = triangle_rule(degree)
    vals = eval_on_elements(fn, mesh, rule.points)
    return float(2.0 * mesh.areas @ (vals @ rule.weights))


# ----------------------------------------------------------------------------
# interpolation and projections
# ----------------------------------------------------------------------------


def face_means(fn, mesh: Mesh, degree: int = 10, side: int = 0) -> np.ndarray:
    rule = segment_rule(degree)
    return eval_on_faces(fn, mesh, rule.points, side) @ rule.weights


def cr_interpolate(v, mesh: Mesh, degree: int = 10) -> DiscreteField:
    """CR interpolant: each face dof is the mean of ``v`` over that face.

    ``v`` is a user function (evaluated from the ``K-`` side, so it should
    be continuous across faces) or a :class:`DiscreteField` (its ``K-``
    trace is used).
    """
    space = CrSpace(mesh)
    if isinstance(v, DiscreteField):
        rule = segment_rule(degree)
        vals, _ = v.face_traces(rule.points, 0)
        return DiscreteField(space, vals @ rule.weights)
    return DiscreteField(space, face_means(v, mesh, degree))


def cell_average(v, mesh: Mesh, degree: int = 10) -> np.ndarray:
    """Mean value of ``v`` on each element."""
    rule = triangle_rule(degree)
    if isinstance(v, DiscreteField):
        vals = v.values(rule.points)
    else:
        vals = eval_on_elements(v, mesh, rule.points)
    return 2.0 * (vals @ rule.weights)


def _ref_mass(k: int) -> np.ndarray:
    rule = triangle_rule(2 * k)
    val, _ = _lagrange(k, rule.points)
    return (val * rule.weights[:, None]).T @ val * 2.0  # reference area normalised to 1


def l2_project_rhs(f, degree: int, mesh: Mesh, quad_degree: int = 10) -> DiscreteField:
    """Elementwise L2 projection of ``f`` onto P_degree (degree 0, 1 or 2)."""
    space = DgSpace(mesh, degree)
    rule = triangle_rule(quad_degree)
    fv = eval_on_elements(f, mesh, rule.points)
    val, _ = _lagrange(degree, rule.points)
    # moments divided by 2|K| so the reference mass matrix applies unchanged
    mom = 2.0 * (fv * rule.weights[None, :]) @ val
    coeffs = np.linalg.solve(_ref_mass(degree), mom.T).T
    return DiscreteField(space, coeffs.ravel())
