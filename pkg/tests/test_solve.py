import numpy as np
import pytest
import scipy.sparse as sp

from jumpfem.coeff import CoefficientField
from jumpfem.estimate import jump_seminorm
from jumpfem.mesh import rectangle_mesh
from jumpfem.quadrature import triangle_rule
from jumpfem.solve import (
    SolverError,
    assemble_cr,
    assemble_dg,
    default_gamma,
    solve_direct,
    solve_field,
    solve_sparse_direct,
    solve_spd,
)
from jumpfem.spaces import DgSpace, DiscreteField

from conftest import random_mesh


def _two_subdomain_mesh(n=4):
    return rectangle_mesh(-1, 1, -1, 1, n, n, lambda cx, cy: np.where(cx < 0, 1, 2))


def test_identity_and_2x2():
    b = np.array([3.0, -1.0, 2.5])
    assert np.allclose(solve_spd((sp.identity(3), b)), b)
    x = solve_spd((np.array([[2.0, 1.0], [1.0, 2.0]]), np.array([3.0, 3.0])), 1e-14)
    assert np.allclose(x, [1.0, 1.0], atol=1e-13)


def test_solver_errors():
    with pytest.raises(SolverError, match="not SPD"):
        solve_spd((np.array([[1.0, 2.0], [2.0, 1.0]]), np.array([1.0, -1.0])))
    with pytest.raises(SolverError, match="not SPD"):
        solve_spd((np.array([[-1.0, 0.0], [0.0, 1.0]]), np.array([1.0, 1.0])))
    m = _two_subdomain_mesh(8)
    s = assemble_cr(m, CoefficientField(m, {1: 1.0, 2: 1e4}), lambda x, y: 1.0)
    with pytest.raises(SolverError, match="no convergence within 2 iterations"):
        solve_spd(s, 1e-12, max_iter=2)
    with pytest.raises(SolverError, match="not SPD"):
        solve_direct((np.array([[1.0, 2.0], [2.0, 1.0]]), np.ones(2)))


def test_cr_diagonal_entry_by_hand(square2):
    # theta = 1 - 2 lambda_opp with |grad lambda_opp|^2 = 2 on both halves:
    # 2 triangles * |grad theta|^2 (= 8) * |K| (= 1/2) = 8
    s = assemble_cr(square2, CoefficientField(square2, {0: 1.0}), lambda x, y: 0.0)
    assert s.matrix.shape == (1, 1)
    assert s.matrix[0, 0] == pytest.approx(8.0)


@pytest.mark.parametrize("method", ["cr", "dg1", "dg2"])
def test_zero_load_gives_zero(method):
    m = _two_subdomain_mesh()
    c = CoefficientField(m, {1: 1.0, 2: 100.0})
    s = assemble_cr(m, c, lambda x, y: 0.0) if method == "cr" else assemble_dg(m, c, lambda x, y: 0.0, int(method[-1]))
    assert np.all(solve_field(s).coeffs == 0.0)


def test_cr_coefficient_scaling():
    m = _two_subdomain_mesh()
    f = lambda x, y: np.sin(x) + y  # noqa: E731
    s1 = assemble_cr(m, CoefficientField(m, {1: 1.0, 2: 7.0}), f)
    s2 = assemble_cr(m, CoefficientField(m, {1: 3.0, 2: 21.0}), f)
    assert abs(s2.matrix - 3 * s1.matrix).max() <= 1e-12 * abs(s2.matrix).max()
    x1, x2 = solve_spd(s1, 1e-13), solve_spd(s2, 1e-13)
    assert np.allclose(x2, x1 / 3, rtol=1e-9, atol=1e-14)


@pytest.mark.parametrize("degree", [1, 2])
def test_dg_symmetry_and_residual(degree, rng):
    m = random_mesh(rng)
    alpha = {0: float(10 ** rng.uniform(-3, 3))}
    m = type(m)(m.vertices, m.elements, (m.centroids[:, 0] > 0.5).astype(np.int64))
    alpha[1] = float(10 ** rng.uniform(-3, 3))
    c = CoefficientField(m, alpha)
    s = assemble_dg(m, c, lambda x, y: np.cos(3 * x) * y, degree)
    A = s.matrix
    assert abs(A - A.T).max() <= 1e-12 * abs(A).max()
    x = solve_spd(s, 1e-12)
    assert np.linalg.norm(A @ x - s.rhs) <= 1e-11 * np.linalg.norm(s.rhs)


def test_cr_galerkin_orthogonality():
    m = _two_subdomain_mesh()
    c = CoefficientField(m, {1: 1.0, 2: 1e3})
    s = assemble_cr(m, c, lambda x, y: 1.0 + x)
    x = solve_spd(s, 1e-12)
    assert np.linalg.norm(s.matrix @ x - s.rhs) <= 1e-12 * np.linalg.norm(s.rhs) * 1.01


def test_dense_oracle(rng):
    for _ in range(10):
        m = random_mesh(rng, n_max=60)
        c = CoefficientField(m, {0: float(10 ** rng.uniform(-4, 4))})
        s = assemble_cr(m, c, lambda x, y: 1.0 + x * y)
        if len(s.rhs) == 0:
            continue
        x = solve_spd(s, 1e-13)
        ref = solve_direct(s)
        assert np.linalg.norm(x - ref) <= 1e-8 * np.linalg.norm(ref)
        assert np.allclose(solve_sparse_direct(s), ref, rtol=1e-10, atol=1e-14)


def test_penalty_reduces_jumps():
    m = _two_subdomain_mesh()
    c = CoefficientField(m, {1: 1.0, 2: 10.0})
    f = lambda x, y: 1.0 + x  # noqa: E731
    seminorms = []
    for g in (10.0, 100.0, 1000.0):
        u = solve_field(assemble_dg(m, c, f, 1, g), 1e-12)
        seminorms.append(jump_seminorm(u, c))
    assert seminorms[0] > seminorms[1] > seminorms[2]


def test_dg_consistency_with_exact_solution():
    # a_dg(u, phi) - (f, phi) vanishes for the exact solution: apply the
    # matrix to the elementwise P2 interpolant of a quadratic exact solution
    m = rectangle_mesh(0, 1, 0, 1, 3, 3)
    c = CoefficientField(m, {0: 2.0})
    u = lambda x, y: x * (1 - x) + 0 * y  # noqa: E731
    f = lambda x, y: 4.0 + 0 * x  # -div(2 grad u)
    nodes = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, .5, .5], [.5, 0, .5], [.5, .5, 0]])
    xy = m.map_points(nodes)
    s = assemble_dg(m, c, f, 2, dirichlet=lambda x, y: u(x, y))
    uh = u(xy[..., 0], xy[..., 1]).ravel()
    assert np.abs(s.matrix @ uh - s.rhs).max() <= 1e-12 * np.abs(s.rhs).max()


def test_gamma_validation():
    m = _two_subdomain_mesh(2)
    c = CoefficientField(m, {1: 1.0, 2: 1.0})
    with pytest.raises(ValueError):
        assemble_dg(m, c, lambda x, y: 1.0, 1, gamma=0.0)
    with pytest.raises(ValueError):
        assemble_dg(m, c, lambda x, y: 1.0, 3)
    assert default_gamma(1) == 40.0 and default_gamma(2) == 90.0


def test_small_gamma_reports_indefinite():
    m = _two_subdomain_mesh(4)
    c = CoefficientField(m, {1: 1.0, 2: 1.0})
    s = assemble_dg(m, c, lambda x, y: 1.0, 1, gamma=0.01)
    with pytest.raises(SolverError, match="increase gamma"):
        solve_spd(s, 1e-12)
