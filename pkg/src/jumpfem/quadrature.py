"""Quadrature on the reference triangle and the unit segment.

Triangle rules are collapsed (Duffy) tensor products of Gauss-Legendre
rules, with the collapse Jacobian folded into the weights (one extra point
in the collapsed direction). Gauss-Jacobi nodes from scipy lose about one
digit in the weights beyond degree 15, which is why Legendre is used
twice. Weights are positive and points interior.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre


@dataclass(frozen=True)
class QuadratureRule:
    degree: int
    points: np.ndarray  # barycentric (nq, 3) for triangles, (nq,) in [0, 1] for segments
    weights: np.ndarray  # sum to 1/2 (triangle) or 1 (segment)

    def __len__(self):
        return len(self.weights)


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    if degree < 0:
        raise ValueError("quadrature degree must be nonnegative")
    xu, wu = roots_legendre(max(1, (degree + 3) // 2))
    xv, wv = roots_legendre(max(1, (degree + 2) // 2))
    u = 0.5 * (1.0 + xu)
    wu = 0.5 * wu * (1.0 - u)
    v = 0.5 * (1.0 + xv)
    wv = 0.5 * wv
    U, V = np.meshgrid(u, v, indexing="ij")
    l1 = U.ravel()
    l2 = ((1.0 - U) * V).ravel()
    bary = np.column_stack([1.0 - l1 - l2, l1, l2])
    w = np.outer(wu, wv).ravel()
    bary.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(degree, bary, w)


@lru_cache(maxsize=None)
def segment_rule(degree: int) -> QuadratureRule:
    if degree < 0:
        raise ValueError("quadrature degree must be nonnegative")
    n = max(1, (degree + 2) // 2)
    x, w = roots_legendre(n)
    s = 0.5 * (1.0 + x)
    w = 0.5 * w
    s.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(degree, s, w)
