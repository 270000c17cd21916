"""Piecewise-constant diffusion coefficient and face-level coefficient algebra.

Conventions on a face ``F`` with traces ``v-`` (from ``K-``) and ``v+``:

* jump ``[v] = v- - v+`` (``[v] = v-`` on boundary faces);
* weights ``w- = a+ / (a- + a+)`` and ``w+ = a- / (a- + a+)``;
* flux average ``{v}_w = w- v- + w+ v+``;
* conjugate average ``{v}^w = w+ v- + w- v+``.

With these choices ``[uv] = {v}^w [u] + {u}_w [v]`` holds exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh


def _check_positive(*values):
    for v in values:
        if np.any(np.asarray(v) <= 0) or np.any(~np.isfinite(np.asarray(v, dtype=float))):
            raise ValueError("diffusion coefficients must be positive and finite")


def harmonic_average(a_minus, a_plus):
    _check_positive(a_minus, a_plus)
    a_minus = np.asarray(a_minus, dtype=float)
    a_plus = np.asarray(a_plus, dtype=float)
    out = 2.0 * a_minus * a_plus / (a_minus + a_plus)
    return float(out) if out.ndim == 0 else out


def arithmetic_average(a_minus, a_plus):
    _check_positive(a_minus, a_plus)
    out = 0.5 * (np.asarray(a_minus, dtype=float) + np.asarray(a_plus, dtype=float))
    return float(out) if out.ndim == 0 else out


def face_weights(a_minus, a_plus):
    """Harmonic weights ``(w-, w+)``."""
    _check_positive(a_minus, a_plus)
    a_minus = np.asarray(a_minus, dtype=float)
    a_plus = np.asarray(a_plus, dtype=float)
    s = a_minus + a_plus
    wm, wp = a_plus / s, a_minus / s
    if wm.ndim == 0:
        return float(wm), float(wp)
    return wm, wp


def face_jump(trace_minus, trace_plus=None):
    """``[v]``; pass ``trace_plus=None`` on a boundary face."""
    if trace_plus is None:
        return trace_minus
    return np.subtract(trace_minus, trace_plus)


def weighted_average(trace_minus, trace_plus, weights, mode="flux"):
    """Weighted face average. ``trace_plus=None`` marks a boundary face."""
    if trace_plus is None:
        return trace_minus
    wm, wp = weights
    if mode == "flux":
        return np.multiply(wm, trace_minus) + np.multiply(wp, trace_plus)
    if mode == "conjugate":
        return np.multiply(wp, trace_minus) + np.multiply(wm, trace_plus)
    raise ValueError(f"unknown averaging mode {mode!r}")


def parse_alpha(pairs) -> dict[int, float]:
    """Parse ``"id:value"`` strings (or an iterable of them) into a mapping."""
    if isinstance(pairs, str):
        pairs = pairs.replace(",", " ").split()
    out = {}
    for item in pairs:
        key, sep, val = str(item).partition(":")
        if not sep:
            raise ValueError(f"expected 'id:value', got {item!r}")
        out[int(key)] = float(val)
    _check_positive(list(out.values()))
    return out


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Per-subdomain coefficient bound to a mesh.

    Boundary faces use the single trace for every face quantity, so
    ``alpha_h = alpha_a = alpha_K-`` and ``w- = 1, w+ = 0`` there.
    """

    mesh: Mesh
    alpha_by_subdomain: dict
    alpha: np.ndarray = field(init=False, repr=False)
    alpha_minus: np.ndarray = field(init=False, repr=False)
    alpha_plus: np.ndarray = field(init=False, repr=False)
    alpha_h: np.ndarray = field(init=False, repr=False)
    alpha_a: np.ndarray = field(init=False, repr=False)
    w_minus: np.ndarray = field(init=False, repr=False)
    w_plus: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        table = dict(self.alpha_by_subdomain)
        _check_positive(list(table.values()))
        missing = set(np.unique(self.mesh.subdomain).tolist()) - set(table)
        if missing:
            raise ValueError(f"no coefficient for subdomain(s) {sorted(missing)}")
        ids = np.array(sorted(table))
        vals = np.array([table[i] for i in ids], dtype=float)
        alpha = vals[np.searchsorted(ids, self.mesh.subdomain)]

        fe = self.mesh.face_elements
        bnd = fe[:, 1] < 0
        am = alpha[fe[:, 0]]
        ap = np.where(bnd, am, alpha[np.maximum(fe[:, 1], 0)])
        s = am + ap
        set_ = lambda name, val: object.__setattr__(self, name, val)  # noqa: E731
        set_("alpha", alpha)
        set_("alpha_minus", am)
        set_("alpha_plus", np.where(bnd, 0.0, ap))
        set_("alpha_h", 2.0 * am * ap / s)
        set_("alpha_a", 0.5 * s)
        set_("w_minus", np.where(bnd, 1.0, ap / s))
        set_("w_plus", np.where(bnd, 0.0, am / s))

    def rebind(self, mesh: Mesh) -> "CoefficientField":
        return CoefficientField(mesh, self.alpha_by_subdomain)

    @property
    def jump_ratio(self) -> float:
        v = np.fromiter(self.alpha_by_subdomain.values(), dtype=float)
        return float(v.max() / v.min())
