"""Residual indicators, oscillation, error norms and error representations.

Indicator definitions (``h_K`` element diameter, ``h_F`` face length):

* element residual  ``h_K / sqrt(alpha_K) * ||f_m + div(alpha grad u_h)||_K``
  with ``m = 0`` for CR and ``m = k - 1`` for DG;
* flux jump         ``sqrt(h_F / alpha_A) * ||[alpha grad u_h . n]||_F``  (interior);
* solution jump     ``sqrt(alpha_H / h_F) * ||[u_h]||_F``                (all faces);
* tangential jump   ``sqrt(alpha_H h_F) * ||[grad u_h . t]||_F``         (CR diagnostic).

The local indicator weights interior face terms by 1/2 so that the squares
of the local indicators add up to the global estimator.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .coeff import CoefficientField
from .quadrature import segment_rule, triangle_rule
from .spaces import (
    DiscreteField,
    cr_interpolate,
    eval_on_elements,
    eval_on_faces,
    l2_project_rhs,
)


@dataclass
class IndicatorReport:
    method: str
    eta_r_K: np.ndarray
    eta_jn_F: np.ndarray  # zero on boundary faces
    eta_ju_F: np.ndarray
    eta_jt_F: np.ndarray | None
    eta_K: np.ndarray
    osc_K: np.ndarray

    @property
    def eta(self) -> float:
        return float(np.sqrt(np.sum(self.eta_K**2)))

    @property
    def eta_r(self) -> float:
        return float(np.sqrt(np.sum(self.eta_r_K**2)))

    @property
    def eta_jn(self) -> float:
        return float(np.sqrt(np.sum(self.eta_jn_F**2)))

    @property
    def eta_ju(self) -> float:
        return float(np.sqrt(np.sum(self.eta_ju_F**2)))

    @property
    def eta_jt(self) -> float | None:
        if self.eta_jt_F is None:
            return None
        return float(np.sqrt(np.sum(self.eta_jt_F**2)))

    @property
    def osc(self) -> float:
        return float(np.sqrt(np.sum(self.osc_K**2)))

    def global_display(self) -> float:
        """Estimator summed face by face, each face once."""
        return float(np.sqrt(self.eta_r**2 + self.eta_jn**2 + self.eta_ju**2))


@dataclass
class ErrorReport:
    energy: float
    jump: float
    energy_K: np.ndarray = field(repr=False, default=None)

    @property
    def dg(self) -> float:
        return float(np.hypot(self.energy, self.jump))


def _method(u_h: DiscreteField) -> tuple[str, int]:
    if u_h.space.kind == "cr":
        return "cr", 1
    return "dg", u_h.space.degree


def _l2_norms_on_elements(mesh, values, rule):
    return np.sqrt(2.0 * mesh.areas * ((values**2) @ rule.weights))


# ----------------------------------------------------------------------------
# element quantities
# ----------------------------------------------------------------------------


def projection_degree(method: str, degree: int = 1) -> int:
    return 0 if method == "cr" else degree - 1


def element_residual_indicator(u_h: DiscreteField, coeff: CoefficientField, f, quad_degree=10):
    """``h_K alpha_K^{-1/2} ||r_K||_{0,K}`` for every element."""
    mesh = u_h.mesh
    method, k = _method(u_h)
    m = projection_degree(method, k)
    fm = l2_project_rhs(f, m, mesh, quad_degree)
    rule = triangle_rule(2 * max(m, 1))
    r = fm.values(rule.points) + (coeff.alpha * u_h.laplacian())[:, None]
    return mesh.diameters / np.sqrt(coeff.alpha) * _l2_norms_on_elements(mesh, r, rule)


def oscillation(f, mesh, coeff: CoefficientField, degree: int, quad_degree=10):
    """Per-element ``h_K alpha_K^{-1/2} ||f - f_m||_{0,K}`` and the global value."""
    fm = l2_project_rhs(f, degree, mesh, quad_degree)
    rule = triangle_rule(quad_degree)
    diff = eval_on_elements(f, mesh, rule.points) - fm.values(rule.points)
    osc_K = mesh.diameters / np.sqrt(coeff.alpha) * _l2_norms_on_elements(mesh, diff, rule)
    return osc_K, float(np.sqrt(np.sum(osc_K**2)))


# ----------------------------------------------------------------------------
# face quantities
# ----------------------------------------------------------------------------


def _face_rule(u_h, quad_degree):
    _, k = _method(u_h)
    return segment_rule(max(2 * k, quad_degree))


def _face_norm(mesh, values, rule, faces):
    return np.sqrt(mesh.face_length[faces] * ((values**2) @ rule.weights))


def flux_jump_indicator(u_h: DiscreteField, coeff: CoefficientField, faces=None, quad_degree=2):
    """``sqrt(h_F / alpha_A) ||[alpha grad u_h . n]||_F`` on interior faces."""
    mesh = u_h.mesh
    faces = mesh.interior_faces if faces is None else np.asarray(faces)
    if np.any(mesh.is_boundary_face[faces]):
        raise ValueError("flux jump indicator is defined on interior faces only")
    rule = _face_rule(u_h, quad_degree)
    _, gm = u_h.face_traces(rule.points, 0, faces)
    _, gp = u_h.face_traces(rule.points, 1, faces)
    n = mesh.normals[faces][:, None, :]
    jn = coeff.alpha_minus[faces, None] * np.sum(gm * n, -1) - coeff.alpha_plus[
        faces, None
    ] * np.sum(gp * n, -1)
    return np.sqrt(mesh.face_length[faces] / coeff.alpha_a[faces]) * _face_norm(
        mesh, jn, rule, faces
    )


def trace_jumps(u_h: DiscreteField, s, faces):
    """``([u_h], [d u_h / dt])`` at segment points ``s`` of ``faces``.

    Jumps of nonconforming fields are small differences of O(1) traces, so
    both are evaluated in extended precision, and the tangential derivative
    uses the barycentric direction of the face (entries exactly 0 and
    +-1/h_F) instead of physical gradients. On boundary faces the jump is
    the ``K-`` trace. ``t`` points from ``faces[:, 0]`` to ``faces[:, 1]``.
    """
    mesh = u_h.mesh
    faces = np.asarray(faces)
    s = np.asarray(s, dtype=np.longdouble)
    ends = np.array([0.0, 1.0], dtype=np.longdouble)
    jv = np.zeros((len(faces), len(s)), dtype=np.longdouble)
    jt = np.zeros_like(jv)
    for side, sign in ((0, 1), (1, -1)):
        K = mesh.face_elements[faces, side]
        ok = K >= 0
        if not ok.any():
            continue
        fo = faces[ok]
        bary = mesh.face_bary(s, side, fo)
        e = mesh.face_bary(ends, side, fo)
        dlam = (e[:, 1] - e[:, 0]) / mesh.face_length[fo][:, None]
        c = u_h.local_coeffs(K[ok]).astype(np.longdouble)
        val, der = u_h.space.local_basis(bary.reshape(-1, 3))
        nq = len(s)
        val = np.asarray(val).reshape(len(fo), nq, -1)
        der = np.asarray(der).reshape(len(fo), nq, -1, 3)
        jv[ok] += sign * np.einsum("fqn,fn->fq", val, c)
        jt[ok] += sign * np.einsum("fqnj,fn,fj->fq", der, c, dlam)
    return jv, jt


def solution_jumps(u_h: DiscreteField, s, faces, dirichlet=None):
    """``[u_h]`` at segment points; boundary faces use ``u_h - g``."""
    mesh = u_h.mesh
    faces = np.asarray(faces)
    jv, _ = trace_jumps(u_h, s, faces)
    jump = jv.astype(float)
    if dirichlet is not None:
        bnd = mesh.is_boundary_face[faces]
        if bnd.any():
            jump[bnd] -= eval_on_faces(dirichlet, mesh, s, 0, faces[bnd])
    return jump


def solution_jump_indicator(
    u_h: DiscreteField, coeff: CoefficientField, faces=None, quad_degree=2, dirichlet=None
):
    """``sqrt(alpha_H / h_F) ||[u_h]||_F``, equal to the jump seminorm."""
    mesh = u_h.mesh
    faces = np.arange(mesh.n_faces) if faces is None else np.asarray(faces)
    rule = _face_rule(u_h, quad_degree if dirichlet is None else max(quad_degree, 10))
    ju = solution_jumps(u_h, rule.points, faces, dirichlet)
    return np.sqrt(coeff.alpha_h[faces] / mesh.face_length[faces]) * _face_norm(
        mesh, ju, rule, faces
    )


def tangential_jump_indicator(u_h: DiscreteField, coeff: CoefficientField, faces=None, quad_degree=2):
    """``sqrt(alpha_H h_F) ||[grad u_h . t]||_F``; single-sided on the boundary."""
    mesh = u_h.mesh
    faces = np.arange(mesh.n_faces) if faces is None else np.asarray(faces)
    rule = _face_rule(u_h, quad_degree)
    _, jt = trace_jumps(u_h, rule.points, faces)
    return np.sqrt(coeff.alpha_h[faces] * mesh.face_length[faces]) * _face_norm(
        mesh, jt.astype(float), rule, faces
    )


def jump_l2_norms(u_h: DiscreteField, faces=None, quad_degree=2):
    """``(||[u_h]||_F, ||[grad u_h . t]||_F)`` per face."""
    mesh = u_h.mesh
    faces = np.arange(mesh.n_faces) if faces is None else np.asarray(faces)
    rule = _face_rule(u_h, quad_degree)
    jv, jt = trace_jumps(u_h, rule.points, faces)
    return _face_norm(mesh, jv.astype(float), rule, faces), _face_norm(mesh, jt.astype(float), rule, faces)


# ----------------------------------------------------------------------------
# local and global combination
# ----------------------------------------------------------------------------


def local_indicator(mesh, eta_r_K, eta_jn_F, eta_ju_F):
    """Combine element and face terms: half weight for interior faces, full
    weight for boundary faces (which carry only the solution jump)."""
    bnd = mesh.is_boundary_face
    face_sq = np.where(bnd, eta_ju_F**2, 0.5 * (eta_jn_F**2 + eta_ju_F**2))
    return np.sqrt(eta_r_K**2 + face_sq[mesh.element_faces].sum(axis=1))


def estimate(
    u_h: DiscreteField,
    coeff: CoefficientField,
    f,
    quad_degree: int = 10,
    dirichlet=None,
) -> IndicatorReport:
    """All indicators and the oscillation for a CR or DG solution."""
    mesh = u_h.mesh
    method, k = _method(u_h)
    eta_r = element_residual_indicator(u_h, coeff, f, quad_degree)
    eta_jn = np.zeros(mesh.n_faces)
    fi = mesh.interior_faces
    eta_jn[fi] = flux_jump_indicator(u_h, coeff, fi)
    eta_ju = solution_jump_indicator(u_h, coeff, dirichlet=dirichlet)
    eta_jt = tangential_jump_indicator(u_h, coeff) if method == "cr" else None
    osc_K, _ = oscillation(f, mesh, coeff, projection_degree(method, k), quad_degree)
    return IndicatorReport(
        method=method,
        eta_r_K=eta_r,
        eta_jn_F=eta_jn,
        eta_ju_F=eta_ju,
        eta_jt_F=eta_jt,
        eta_K=local_indicator(mesh, eta_r, eta_jn, eta_ju),
        osc_K=osc_K,
    )


# ----------------------------------------------------------------------------
# errors against exact solutions
# ----------------------------------------------------------------------------


def energy_error_K(grad_exact, u_h: DiscreteField, coeff: CoefficientField, quad_degree=10):
    """Per-element ``alpha_K ||grad u - grad_h u_h||_K^2``."""
    mesh = u_h.mesh
    rule = triangle_rule(quad_degree)
    xy = mesh.map_points(rule.points)
    sub = np.broadcast_to(mesh.subdomain[:, None], xy.shape[:2])
    g = np.asarray(grad_exact(xy[..., 0], xy[..., 1], sub), dtype=float)
    d = g - u_h.gradients(rule.points)
    return coeff.alpha * 2.0 * mesh.areas * (np.sum(d**2, -1) @ rule.weights)


def energy_error(grad_exact, u_h, coeff, quad_degree=10) -> float:
    """``||alpha^{1/2} grad_h (u - u_h)||_0``."""
    return float(np.sqrt(np.sum(energy_error_K(grad_exact, u_h, coeff, quad_degree))))


def jump_seminorm(u_h, coeff, dirichlet=None) -> float:
    """``(sum_F ||u_h||_{J,F}^2)^{1/2}``."""
    return float(np.sqrt(np.sum(solution_jump_indicator(u_h, coeff, dirichlet=dirichlet) ** 2)))


def dg_error_norm(grad_exact, u_h, coeff, quad_degree=10, dirichlet=None) -> float:
    """``|||u - u_h|||_dg``; the jump part only involves ``u_h`` because the
    exact solution is continuous and matches the boundary data."""
    return float(
        np.hypot(
            energy_error(grad_exact, u_h, coeff, quad_degree),
            jump_seminorm(u_h, coeff, dirichlet),
        )
    )


def error_report(grad_exact, u_h, coeff, quad_degree=10, dirichlet=None) -> ErrorReport:
    eK = energy_error_K(grad_exact, u_h, coeff, quad_degree)
    return ErrorReport(
        energy=float(np.sqrt(eK.sum())),
        jump=jump_seminorm(u_h, coeff, dirichlet),
        energy_K=eK,
    )


# ----------------------------------------------------------------------------
# error representations
# ----------------------------------------------------------------------------


@dataclass
class RepresentationCheck:
    lhs: float
    terms: dict

    @property
    def rhs(self) -> float:
        return float(sum(self.terms.values()))

    @property
    def gap(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs))
        return 0.0 if scale == 0.0 else abs(self.lhs - self.rhs) / scale


def _exact_face_data(u_exact, grad_exact, mesh, s, faces, side):
    """Exact value and gradient on faces, evaluated with the subdomain of
    the element on ``side``."""
    val = eval_on_faces(u_exact, mesh, s, side, faces)
    xy = mesh.face_points(s, faces)
    K = mesh.face_elements[faces, side]
    sub = mesh.subdomain[np.where(K >= 0, K, mesh.face_elements[faces, 0])]
    g = np.asarray(
        grad_exact(xy[..., 0], xy[..., 1], np.broadcast_to(sub[:, None], xy.shape[:2])),
        dtype=float,
    )
    return val, g


def _weighted_error_flux(u_exact, grad_exact, u_h, coeff, s):
    """``{alpha grad(u - u_h) . n}_w`` on all faces, shape ``(nF, nq)``."""
    mesh = u_h.mesh
    faces = np.arange(mesh.n_faces)
    n = mesh.normals[:, None, :]
    _, gu_m = _exact_face_data(u_exact, grad_exact, mesh, s, faces, 0)
    _, gu_p = _exact_face_data(u_exact, grad_exact, mesh, s, faces, 1)
    _, gh_m = u_h.face_traces(s, 0)
    _, gh_p = u_h.face_traces(s, 1)
    fm = coeff.alpha_minus[:, None] * np.sum((gu_m - gh_m) * n, -1)
    fp = coeff.alpha_plus[:, None] * np.sum((gu_p - gh_p) * n, -1)
    return coeff.w_minus[:, None] * fm + coeff.w_plus[:, None] * fp


def _face_integral(mesh, values, rule, faces=None):
    L = mesh.face_length if faces is None else mesh.face_length[faces]
    return float(np.sum(L * (values @ rule.weights)))


def representation_check_cr(u_exact, grad_exact, u_cr, coeff, f, quad_degree=10):
    """Both sides of the L2 representation of the broken energy error of a
    CR solution (homogeneous Dirichlet data).

    Terms: ``element`` = sum_K (f, e - e_I)_K, ``flux_jump`` =
    -sum_{E_I} int j_n {e - e_I}^w, ``solution_jump`` =
    -sum_E int {alpha grad e . n}_w [u_cr], with ``e_I = I_cr e``.
    """
    mesh = u_cr.mesh
    trule = triangle_rule(quad_degree)
    srule = segment_rule(quad_degree)
    s = srule.points

    # e - e_I = (u - u_cr) - (I_cr u - u_cr) = u - I_cr u
    e_I = cr_interpolate(u_exact, mesh, quad_degree) - u_cr
    lhs = float(np.sum(energy_error_K(grad_exact, u_cr, coeff, quad_degree)))

    fv = eval_on_elements(f, mesh, trule.points)
    uv = eval_on_elements(u_exact, mesh, trule.points)
    d = uv - u_cr.values(trule.points) - e_I.values(trule.points)
    element = float(np.sum(2.0 * mesh.areas * ((fv * d) @ trule.weights)))

    fi = mesh.interior_faces
    dm = (
        eval_on_faces(u_exact, mesh, s, 0, fi)
        - u_cr.face_traces(s, 0, fi)[0]
        - e_I.face_traces(s, 0, fi)[0]
    )
    dp = (
        eval_on_faces(u_exact, mesh, s, 1, fi)
        - u_cr.face_traces(s, 1, fi)[0]
        - e_I.face_traces(s, 1, fi)[0]
    )
    conj = coeff.w_plus[fi, None] * dm + coeff.w_minus[fi, None] * dp
    n = mesh.normals[fi][:, None, :]
    jn = coeff.alpha_minus[fi, None] * np.sum(u_cr.face_traces(s, 0, fi)[1] * n, -1) - (
        coeff.alpha_plus[fi, None] * np.sum(u_cr.face_traces(s, 1, fi)[1] * n, -1)
    )
    flux_jump = -_face_integral(mesh, jn * conj, srule, fi)

    wflux = _weighted_error_flux(u_exact, grad_exact, u_cr, coeff, s)
    jump = solution_jumps(u_cr, s, np.arange(mesh.n_faces))
    solution_jump = -_face_integral(mesh, wflux * jump, srule)

    return RepresentationCheck(
        lhs, {"element": element, "flux_jump": flux_jump, "solution_jump": solution_jump}
    )


def representation_check_dg(
    u_exact, grad_exact, u_dg, coeff, f, gamma, quad_degree=10, penalty_sign=1.0
):
    """Both sides of the L2 representation of the broken energy error of a
    symmetric interior-penalty solution (homogeneous Dirichlet data).

    With ``e = u - u_dg`` and ``ebar`` its cell average:

    * ``element``       = sum_K (f + div(alpha grad u_dg), e - ebar)_K
    * ``weighted_flux`` = -sum_E int {alpha grad e . n}_w [u_dg]
    * ``flux_jump``     = -sum_{E_I} int [alpha grad u_dg . n] {e - ebar}^w
    * ``penalty``       = +sum_E int gamma alpha_H / h_F [u_dg][ebar]

    The penalty term enters with a plus sign: the error equation tested
    with ``ebar`` gives ``sum_E int {alpha grad e . n}_w [ebar] =
    sum_E int gamma alpha_H/h_F [e][ebar]`` and ``[e] = -[u_dg]``.
    ``penalty_sign=-1`` evaluates the opposite convention for comparison.
    """
    mesh = u_dg.mesh
    trule = triangle_rule(quad_degree)
    srule = segment_rule(quad_degree)
    s = srule.points
    lhs = float(np.sum(energy_error_K(grad_exact, u_dg, coeff, quad_degree)))

    uv = eval_on_elements(u_exact, mesh, trule.points)
    ev = uv - u_dg.values(trule.points)
    ebar = 2.0 * (ev @ trule.weights)  # cell averages
    fv = eval_on_elements(f, mesh, trule.points)
    res = fv + (coeff.alpha * u_dg.laplacian())[:, None]
    element = float(np.sum(2.0 * mesh.areas * ((res * (ev - ebar[:, None])) @ trule.weights)))

    faces = np.arange(mesh.n_faces)
    wflux = _weighted_error_flux(u_exact, grad_exact, u_dg, coeff, s)
    jump = solution_jumps(u_dg, s, faces)
    weighted_flux = -_face_integral(mesh, wflux * jump, srule)

    fi = mesh.interior_faces
    Km, Kp = mesh.face_elements[fi, 0], mesh.face_elements[fi, 1]
    dm = eval_on_faces(u_exact, mesh, s, 0, fi) - u_dg.face_traces(s, 0, fi)[0] - ebar[Km, None]
    dp = eval_on_faces(u_exact, mesh, s, 1, fi) - u_dg.face_traces(s, 1, fi)[0] - ebar[Kp, None]
    conj = coeff.w_plus[fi, None] * dm + coeff.w_minus[fi, None] * dp
    n = mesh.normals[fi][:, None, :]
    jn = coeff.alpha_minus[fi, None] * np.sum(u_dg.face_traces(s, 0, fi)[1] * n, -1) - (
        coeff.alpha_plus[fi, None] * np.sum(u_dg.face_traces(s, 1, fi)[1] * n, -1)
    )
    flux_jump = -_face_integral(mesh, jn * conj, srule, fi)

    fe = mesh.face_elements
    ebar_jump = ebar[fe[:, 0]] - np.where(fe[:, 1] >= 0, ebar[np.maximum(fe[:, 1], 0)], 0.0)
    sigma = gamma * coeff.alpha_h / mesh.face_length
    penalty = penalty_sign * _face_integral(mesh, (sigma * ebar_jump)[:, None] * jump, srule)

    return RepresentationCheck(
        lhs,
        {
            "element": element,
            "weighted_flux": weighted_flux,
            "flux_jump": flux_jump,
            "penalty": penalty,
        },
    )


# ----------------------------------------------------------------------------
# local efficiency
# ----------------------------------------------------------------------------


def patch_matrix(mesh) -> sp.csr_matrix:
    """Element-to-element incidence of ``K`` plus its face neighbours."""
    nb = mesh.neighbours()
    rows = np.repeat(np.arange(mesh.n_elements), 3)
    cols = nb.ravel()
    ok = cols >= 0
    nt = mesh.n_elements
    P = sp.coo_matrix((np.ones(ok.sum()), (rows[ok], cols[ok])), shape=(nt, nt))
    return (P + sp.identity(nt)).tocsr()


def local_efficiency_ratios(report: IndicatorReport, err: ErrorReport, u_h, coeff, dirichlet=None):
    """``eta_K / (|||e|||_{patch} + osc_{patch})`` for every element.

    The patch is ``K`` with its face neighbours; the patch error collects the
    energy error of its elements and the jump seminorm of all their faces.
    A zero denominator with zero ``eta_K`` gives ratio 0.
    """
    mesh = u_h.mesh
    P = patch_matrix(mesh)
    nt, nf = mesh.n_elements, mesh.n_faces
    E = sp.coo_matrix(
        (np.ones(3 * nt), (np.repeat(np.arange(nt), 3), mesh.element_faces.ravel())),
        shape=(nt, nf),
    ).tocsr()
    patch_faces = (P @ E) > 0
    ju2 = solution_jump_indicator(u_h, coeff, dirichlet=dirichlet) ** 2
    err2 = P @ err.energy_K + patch_faces @ ju2
    osc2 = P @ report.osc_K**2
    denom = np.sqrt(err2) + np.sqrt(osc2)
    ratio = np.zeros(nt)
    pos = denom > 0
    ratio[pos] = report.eta_K[pos] / denom[pos]
    ratio[~pos & (report.eta_K > 0)] = np.inf
    return ratio
