import numpy as np
import pytest

from jumpfem.mesh import rectangle_mesh, uniform_refine
from jumpfem.quadrature import segment_rule, triangle_rule
from jumpfem.spaces import (
    CrSpace,
    DgSpace,
    DiscreteField,
    cell_average,
    cr_basis_eval,
    cr_interpolate,
    dg_basis_eval,
    l2_project_rhs,
)

from conftest import random_mesh


def test_cr_basis_nodal_values(ref_triangle):
    for i in range(3):
        mid = np.full(3, 0.5)
        mid[i] = 0.0  # midpoint of the face opposite vertex i
        val, _ = cr_basis_eval(ref_triangle, 0, mid)
        assert val[i] == pytest.approx(1.0)
        vert = np.eye(3)[i]
        val, _ = cr_basis_eval(ref_triangle, 0, vert)
        assert val[i] == pytest.approx(-1.0)
    val, _ = cr_basis_eval(ref_triangle, 0, np.full(3, 1 / 3))
    assert np.allclose(val, 1 / 3)


def test_dg_basis(ref_triangle, rng):
    val, _ = dg_basis_eval(ref_triangle, 0, 1, np.eye(3)[1])
    assert np.allclose(val, [0, 1, 0])
    pts = rng.dirichlet(np.ones(3), size=20)
    for k in (1, 2):
        val, grad = dg_basis_eval(ref_triangle, 0, k, pts)
        assert val.shape[1] == (3 if k == 1 else 6)
        assert np.allclose(val.sum(axis=1), 1.0)
        assert np.allclose(grad.sum(axis=1), 0.0, atol=1e-13)
    with pytest.raises(ValueError):
        dg_basis_eval(ref_triangle, 0, 3, pts)


def test_cr_interpolation_reproduces_affine(rng):
    m = random_mesh(rng)
    rule = triangle_rule(4)
    xy = m.map_points(rule.points)
    for v in (lambda x, y: 3 * x - 2 * y + 1, lambda x, y: 2.5 + 0 * x):
        u = cr_interpolate(v, m)
        assert np.allclose(u.values(rule.points), v(xy[..., 0], xy[..., 1]), atol=1e-13)


def test_cr_interpolation_face_means(square2):
    u = cr_interpolate(lambda x, y: x**2, square2)
    mid = square2.vertices[square2.faces].mean(axis=1)
    right = np.flatnonzero(np.isclose(mid[:, 0], 1.0))[0]
    bottom = np.flatnonzero(np.isclose(mid[:, 1], 0.0))[0]
    left = np.flatnonzero(np.isclose(mid[:, 0], 0.0))[0]
    diag = square2.interior_faces[0]
    assert u.coeffs[right] == pytest.approx(1.0)
    assert u.coeffs[bottom] == pytest.approx(1 / 3)
    assert u.coeffs[left] == pytest.approx(0.0)
    assert u.coeffs[diag] == pytest.approx(1 / 3)


def test_cell_average(ref_triangle, rng):
    assert cell_average(lambda x, y: 7.0, ref_triangle)[0] == pytest.approx(7.0)
    assert cell_average(lambda x, y: x, ref_triangle)[0] == pytest.approx(1 / 3)
    m = random_mesh(rng)
    c = rng.normal(size=6)
    v = lambda x, y: c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y  # noqa: E731
    avg = cell_average(v, m)
    rule = triangle_rule(4)
    xy = m.map_points(rule.points)
    resid = (v(xy[..., 0], xy[..., 1]) - avg[:, None]) @ rule.weights
    assert np.allclose(resid, 0.0, atol=1e-14)


def test_l2_projection(ref_triangle, rng):
    p0 = l2_project_rhs(lambda x, y: 4.0, 2, ref_triangle)
    assert np.allclose(p0.values(triangle_rule(4).points), 4.0)
    p = l2_project_rhs(lambda x, y: x, 0, ref_triangle)
    assert p.coeffs[0] == pytest.approx(1 / 3)
    m = random_mesh(rng)
    f = lambda x, y: x**2  # noqa: E731
    p1 = l2_project_rhs(f, 1, m)
    rule = triangle_rule(4)
    xy = m.map_points(rule.points)
    r = f(xy[..., 0], xy[..., 1]) - p1.values(rule.points)
    for q in (np.ones_like(xy[..., 0]), xy[..., 0], xy[..., 1]):
        assert np.abs((r * q) @ rule.weights).max() <= 1e-12


def test_cr_jump_has_zero_mean(rng):
    m = random_mesh(rng)
    u = DiscreteField(CrSpace(m), rng.normal(size=m.n_faces))
    fi = m.interior_faces
    s = segment_rule(2)
    vm, _ = u.face_traces(s.points, 0, fi)
    vp, _ = u.face_traces(s.points, 1, fi)
    means = (vm - vp) @ s.weights
    assert np.abs(means).max() <= 1e-13


def test_field_algebra_and_shape_errors(square2):
    u = DiscreteField(CrSpace(square2), np.arange(5.0))
    w = cr_interpolate(lambda x, y: x, square2)
    assert np.allclose((u + w).coeffs, u.coeffs + w.coeffs)
    assert np.allclose((2 * u - u).coeffs, u.coeffs)
    with pytest.raises(ValueError):
        u + DiscreteField(DgSpace(square2, 1), np.zeros(6))
    with pytest.raises(ValueError):
        DiscreteField(CrSpace(square2), np.zeros(4))


def test_p2_laplacian(rng):
    m = random_mesh(rng)
    # x^2 + 3 y^2 is reproduced by P2 Lagrange interpolation: Laplacian 8
    sp2 = DgSpace(m, 2)
    nodes = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, .5, .5], [.5, 0, .5], [.5, .5, 0]])
    xy = m.map_points(nodes)
    u = DiscreteField(sp2, (xy[..., 0] ** 2 + 3 * xy[..., 1] ** 2).ravel())
    assert np.allclose(u.laplacian(), 8.0)


def _ratios(mesh, v, grad):
    rule = triangle_rule(10)
    xy = mesh.map_points(rule.points)
    vi = cr_interpolate(v, mesh)
    vv = v(xy[..., 0], xy[..., 1])
    gv = np.stack(grad(xy[..., 0], xy[..., 1]), -1)
    a = 2 * mesh.areas
    nv = np.sqrt(a * (((vv - vi.values(rule.points)) ** 2) @ rule.weights))
    ng = np.sqrt(a * ((np.sum((gv - vi.gradients(rule.points)) ** 2, -1)) @ rule.weights))
    g = np.sqrt(a * (np.sum(gv**2, -1) @ rule.weights))
    avg = cell_average(v, mesh)
    na = np.sqrt(a * (((vv - avg[:, None]) ** 2) @ rule.weights))
    ok = g > 1e-8 * g.max()
    h = mesh.diameters
    return (nv / (h * g))[ok].max(), (ng / g)[ok].max(), (na / (h * g))[ok].max()


def test_interpolation_ratios_stay_bounded():
    rng = np.random.default_rng(0)
    meshes = [rectangle_mesh(0, 1, 0, 1, 3, 3)]
    meshes += [uniform_refine(meshes[0]), uniform_refine(meshes[0], 2)]
    worst = np.zeros((3, 3))
    for _ in range(100):
        a, b, c, d = rng.normal(size=4)
        w1, w2 = rng.uniform(0.5, 4, size=2)
        v = lambda x, y: a * x * x + b * x * y + c * np.sin(w1 * x) * np.cos(w2 * y) + d * y  # noqa: E731
        grad = lambda x, y: (  # noqa: E731
            2 * a * x + b * y + c * w1 * np.cos(w1 * x) * np.cos(w2 * y),
            b * x - c * w2 * np.sin(w1 * x) * np.sin(w2 * y) + d,
        )
        for i, m in enumerate(meshes):
            worst[i] = np.maximum(worst[i], _ratios(m, v, grad))
    # one constant per ratio, the same on all three meshes
    assert np.all(worst < 1.0)
    assert np.all(worst.max(axis=0) / worst.min(axis=0) < 2.0)
