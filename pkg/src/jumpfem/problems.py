"""Benchmark problems for diffusion with piecewise-constant coefficients.

Every function of a problem takes ``(x, y, subdomain)``. The subdomain id
selects the branch of piecewise-defined solutions so that traces on an
interface can be taken from either side.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.optimize import fsolve

from .mesh import Mesh, rectangle_mesh

PI = np.pi


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    make_mesh: Callable[[], Mesh]
    alpha: dict
    f: Callable
    u: Callable | None = None
    grad_u: Callable | None = None
    dirichlet: Callable | None = None  # None means homogeneous data
    description: str = ""

    @property
    def has_exact(self) -> bool:
        return self.u is not None

    def check_interface_conditions(self, n_samples: int = 64, tol: float = 1e-9) -> float:
        """Largest relative mismatch of ``u`` and ``alpha grad u . n`` across
        interior faces between different subdomains of the initial mesh."""
        if not self.has_exact:
            return 0.0
        mesh = self.make_mesh()
        fe = mesh.face_elements
        fi = mesh.interior_faces
        fi = fi[mesh.subdomain[fe[fi, 0]] != mesh.subdomain[fe[fi, 1]]]
        if len(fi) == 0:
            return 0.0
        s = np.linspace(0.05, 0.95, max(2, n_samples // max(1, len(fi))))
        xy = mesh.face_points(s, fi)
        x, y = xy[..., 0], xy[..., 1]
        sm = np.broadcast_to(mesh.subdomain[fe[fi, 0]][:, None], x.shape)
        sp_ = np.broadcast_to(mesh.subdomain[fe[fi, 1]][:, None], x.shape)
        am = np.vectorize(self.alpha.get)(sm)
        ap = np.vectorize(self.alpha.get)(sp_)
        n = mesh.normals[fi][:, None, :]
        um, up = self.u(x, y, sm), self.u(x, y, sp_)
        qm = am * np.sum(self.grad_u(x, y, sm) * n, -1)
        qp = ap * np.sum(self.grad_u(x, y, sp_) * n, -1)
        du = np.max(np.abs(um - up)) / max(np.max(np.abs(um)), 1e-300)
        dq = np.max(np.abs(qm - qp)) / max(np.max(np.abs(qm)), 1e-300)
        worst = float(max(du, dq))
        if worst > tol:
            raise ValueError(f"{self.name}: exact solution violates interface conditions ({worst:.2e})")
        return worst


# ----------------------------------------------------------------------------
# (a) smooth problem on the unit square
# ----------------------------------------------------------------------------


def flat() -> ProblemSpec:
    def u(x, y, sub=None):
        return np.sin(PI * x) * np.sin(PI * y)

    def grad_u(x, y, sub=None):
        return np.stack(
            [PI * np.cos(PI * x) * np.sin(PI * y), PI * np.sin(PI * x) * np.cos(PI * y)], axis=-1
        )

    def f(x, y, sub=None):
        return 2.0 * PI**2 * u(x, y)

    return ProblemSpec(
        "flat",
        lambda: rectangle_mesh(0.0, 1.0, 0.0, 1.0, 4, 4),
        {0: 1.0},
        f,
        u,
        grad_u,
        description="alpha = 1, u = sin(pi x) sin(pi y) on (0,1)^2",
    )


# ----------------------------------------------------------------------------
# (b) two-subdomain manufactured interface solution
# ----------------------------------------------------------------------------


def interface_manufactured(k: float = 1e3) -> ProblemSpec:
    """alpha = 1 for x < 0 (id 1) and alpha = k for x > 0 (id 2);
    u = a_i x (1 - x^2)(1 - y^2) with a_1 = k, a_2 = 1."""
    k = float(k)
    if k <= 0:
        raise ValueError("jump ratio must be positive")

    def amp(x, sub):
        if sub is None:
            return np.where(np.asarray(x) < 0, k, 1.0)
        return np.where(np.asarray(sub) == 1, k, 1.0)

    def u(x, y, sub=None):
        return amp(x, sub) * x * (1.0 - x**2) * (1.0 - y**2)

    def grad_u(x, y, sub=None):
        a = amp(x, sub)
        return np.stack(
            [a * (1.0 - 3.0 * x**2) * (1.0 - y**2), -2.0 * a * x * (1.0 - x**2) * y], axis=-1
        )

    def f(x, y, sub=None):
        return k * (6.0 * x * (1.0 - y**2) + 2.0 * x * (1.0 - x**2))

    return ProblemSpec(
        "interface_manufactured",
        lambda: rectangle_mesh(
            -1.0, 1.0, -1.0, 1.0, 4, 4, lambda cx, cy: np.where(cx < 0, 1, 2)
        ),
        {1: 1.0, 2: k},
        f,
        u,
        grad_u,
        description=f"alpha = 1 | {k:g} across x = 0, polynomial exact solution",
    )


# ----------------------------------------------------------------------------
# (c), (d) checkerboard coefficients around the origin
# ----------------------------------------------------------------------------


def _quadrant(cx, cy):
    return np.where(cx > 0, np.where(cy > 0, 1, 4), np.where(cy > 0, 2, 3))


def _checker_mesh(n=4):
    return lambda: rectangle_mesh(-1.0, 1.0, -1.0, 1.0, n, n, _quadrant)


def checkerboard(k: float = 1e3) -> ProblemSpec:
    """alpha = k in quadrants 1 and 3, 1 in quadrants 2 and 4, f = 1."""
    k = float(k)
    return ProblemSpec(
        "checkerboard",
        _checker_mesh(),
        {1: k, 2: 1.0, 3: k, 4: 1.0},
        lambda x, y, sub=None: np.ones_like(x, dtype=float),
        description=f"non-quasi-monotone checkerboard, ratio {k:g}, f = 1",
    )


def _kellogg_residual(z, gamma):
    R, rho, sigma = z
    return [
        R + np.tan((PI / 2 - sigma) * gamma) / np.tan(rho * gamma),
        1.0 / R + np.tan(rho * gamma) / np.tan(sigma * gamma),
        R + np.tan(sigma * gamma) / np.tan((PI / 2 - rho) * gamma),
    ]


@lru_cache(maxsize=None)
def kellogg_parameters(gamma: float = 0.1, guess=(150.0, 0.7, -14.5)):
    """Solve the sector matching conditions for ``(R, rho, sigma)``.

    ``R`` is the coefficient in quadrants 1 and 3 (1 elsewhere) for which
    ``r^gamma mu(theta)`` solves the homogeneous equation.
    """
    z, info, ier, msg = fsolve(_kellogg_residual, guess, args=(gamma,), full_output=True, xtol=1e-14)
    res = np.max(np.abs(_kellogg_residual(z, gamma)))
    R, rho, sigma = (float(v) for v in z)
    ok = (
        res < 1e-9 * max(1.0, abs(R))
        and max(0.0, PI * gamma - PI) <= 2 * gamma * rho <= min(PI * gamma, PI)
        and max(0.0, PI - PI * gamma) <= -2 * gamma * sigma <= min(PI, 2 * PI - PI * gamma)
    )
    if not ok:
        raise RuntimeError(f"matching conditions not solved for gamma={gamma}: {msg}")
    return R, rho, sigma


def _kellogg_mu(gamma, rho, sigma):
    g = gamma
    # per quadrant: (amplitude, phase shift) with mu = amp * cos((theta - shift) g)
    table = {
        1: (np.cos((PI / 2 - sigma) * g), PI / 2 - rho),
        2: (np.cos(rho * g), PI - sigma),
        3: (np.cos(sigma * g), PI + rho),
        4: (np.cos((PI / 2 - rho) * g), 3 * PI / 2 + sigma),
    }
    amp = np.array([0.0] + [table[q][0] for q in (1, 2, 3, 4)])
    shift = np.array([0.0] + [table[q][1] for q in (1, 2, 3, 4)])
    return amp, shift


def kellogg(gamma: float = 0.1) -> ProblemSpec:
    """Checkerboard with the singular solution ``u = r^gamma mu(theta)``;
    f = 0 and Dirichlet data taken from ``u``."""
    R, rho, sigma = kellogg_parameters(gamma)
    amp, shift = _kellogg_mu(gamma, rho, sigma)

    def polar(x, y, sub):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r = np.hypot(x, y)
        th = np.mod(np.arctan2(y, x), 2 * PI)
        if sub is None:
            q = np.minimum((th // (PI / 2)).astype(int) + 1, 4)
        else:
            q = np.asarray(sub, dtype=int)
            th = np.where((q == 4) & (th < PI / 2), th + 2 * PI, th)
            th = np.where((q == 1) & (th > 3 * PI / 2), th - 2 * PI, th)
        return r, th, q

    def u(x, y, sub=None):
        r, th, q = polar(x, y, sub)
        return r**gamma * amp[q] * np.cos((th - shift[q]) * gamma)

    def grad_u(x, y, sub=None):
        r, th, q = polar(x, y, sub)
        with np.errstate(divide="ignore", invalid="ignore"):
            rg = np.where(r > 0, r ** (gamma - 1.0), 0.0)
        ur = gamma * rg * amp[q] * np.cos((th - shift[q]) * gamma)
        ut = -gamma * rg * amp[q] * np.sin((th - shift[q]) * gamma)
        c, s = np.cos(th), np.sin(th)
        return np.stack([ur * c - ut * s, ur * s + ut * c], axis=-1)

    def f(x, y, sub=None):
        return np.zeros_like(np.asarray(x, dtype=float))

    return ProblemSpec(
        "kellogg",
        _checker_mesh(),
        {1: R, 2: 1.0, 3: R, 4: 1.0},
        f,
        u,
        grad_u,
        dirichlet=u,
        description=f"Kellogg checkerboard, gamma = {gamma}, R = {R:.10g}",
    )


def _fixed(factory, name):
    def make(ratio=None):
        if ratio is not None:
            raise ValueError(f"problem {name!r} has fixed coefficients; --jump-ratio does not apply")
        return factory()

    return make


_CATALOG = {
    "flat": _fixed(flat, "flat"),
    "interface_manufactured": lambda ratio=None: interface_manufactured(1e3 if ratio is None else ratio),
    "checkerboard": lambda ratio=None: checkerboard(1e3 if ratio is None else ratio),
    "kellogg": _fixed(kellogg, "kellogg"),
}


def catalog() -> list[str]:
    return list(_CATALOG)


def get_problem(name: str, jump_ratio: float | None = None) -> ProblemSpec:
    try:
        factory = _CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {', '.join(_CATALOG)}") from None
    return factory(jump_ratio)
