import numpy as np
import pytest

from jumpfem.coeff import CoefficientField
from jumpfem.problems import (
    catalog,
    get_problem,
    interface_manufactured,
    kellogg,
    kellogg_parameters,
)
from jumpfem.spaces import integrate


def test_catalog_entries():
    assert {"flat", "interface_manufactured", "checkerboard", "kellogg"} <= set(catalog())
    with pytest.raises(KeyError, match="unknown problem"):
        get_problem("nope")
    with pytest.raises(ValueError, match="jump-ratio"):
        get_problem("kellogg", 10.0)


@pytest.mark.parametrize("name", ["flat", "interface_manufactured", "checkerboard", "kellogg"])
def test_meshes_match_coefficients(name):
    p = get_problem(name)
    m = p.make_mesh()
    CoefficientField(m, p.alpha)
    assert p.check_interface_conditions() <= 1e-9


@pytest.mark.parametrize("k", [1.0, 1e3, 1e6])
def test_interface_solution(k):
    p = interface_manufactured(k)
    assert p.alpha == {1: 1.0, 2: k}
    x = np.linspace(-1, 1, 7)
    y = np.full_like(x, 0.3)
    for s in (1, 2):
        xs = np.where(s == 1, -np.abs(x), np.abs(x))
        u = p.u(xs, y, np.full_like(x, s, dtype=int))
        a = 1.0 if s == 1 else k
        assert np.allclose(u, (k if s == 1 else 1.0) * xs * (1 - xs**2) * (1 - y**2))
        # strong form: f = -div(alpha grad u) by central differences
        h = 1e-4
        x0, y0 = np.array([0.37 * (-1 if s == 1 else 1)]), np.array([-0.2])
        sub = np.array([s])
        lap = (
            p.u(x0 + h, y0, sub) + p.u(x0 - h, y0, sub) + p.u(x0, y0 + h, sub) + p.u(x0, y0 - h, sub)
            - 4 * p.u(x0, y0, sub)
        ) / h**2
        assert -a * lap[0] == pytest.approx(p.f(x0, y0, sub)[0], rel=1e-6)
    # flux continuity at x = 0 checked from both sides
    y = np.linspace(-0.9, 0.9, 5)
    z = np.zeros_like(y)
    g1 = p.grad_u(z, y, np.ones_like(y, dtype=int))
    g2 = p.grad_u(z, y, 2 * np.ones_like(y, dtype=int))
    assert np.allclose(1.0 * g1[..., 0], k * g2[..., 0])


def test_flat_energy_closed_form():
    p = get_problem("flat")
    m = p.make_mesh()
    val = integrate(lambda x, y: np.sum(p.grad_u(x, y) ** 2, -1), m, 16)
    assert val == pytest.approx(np.pi**2 / 2, rel=1e-10)


def test_kellogg_parameters():
    R, rho, sigma = kellogg_parameters(0.1)
    assert R == pytest.approx(161.4476387975881, rel=1e-12)
    assert rho == pytest.approx(np.pi / 4, rel=1e-12)
    assert sigma == pytest.approx(-14.92256510455152, rel=1e-12)


def test_kellogg_solution_is_harmonic_away_from_origin():
    p = kellogg()
    rng = np.random.default_rng(2)
    h = 1e-4
    for q, (sx, sy) in {1: (1, 1), 2: (-1, 1), 3: (-1, -1), 4: (1, -1)}.items():
        x = sx * rng.uniform(0.2, 0.8, 4)
        y = sy * rng.uniform(0.2, 0.8, 4)
        sub = np.full(4, q)
        lap = (
            p.u(x + h, y, sub) + p.u(x - h, y, sub) + p.u(x, y + h, sub) + p.u(x, y - h, sub)
            - 4 * p.u(x, y, sub)
        ) / h**2
        assert np.abs(lap).max() < 1e-4
        gx = (p.u(x + h, y, sub) - p.u(x - h, y, sub)) / (2 * h)
        assert np.allclose(p.grad_u(x, y, sub)[..., 0], gx, rtol=1e-6)
