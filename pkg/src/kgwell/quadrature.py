"""Gauss quadrature rules on segments and triangles.

Rules are parametrized by the polynomial degree they must integrate
exactly.  Triangle rules are built from tensor Gauss-Legendre points
through the Duffy (collapsed square) map, which is exact for any
requested degree at the cost of a few extra points.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def segment_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Points and weights on [0, 1], exact for polynomials of `degree`."""
    if degree < 0:
        raise ValueError("quadrature degree must be nonnegative")
    npts = (degree + 2) // 2  # Gauss with q points is exact to 2q-1
    x, w = np.polynomial.legendre.leggauss(max(npts, 1))
    pts = 0.5 * (x + 1.0)
    wts = 0.5 * w
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Points (barycentric-free reference coords) and weights on the unit
    triangle {x, y >= 0, x + y <= 1}, exact for polynomials of `degree`.

    Duffy map: (s, t) in [0,1]^2 -> (s, t(1-s)), Jacobian (1-s).  A degree-d
    polynomial pulls back to degree <= d+1 per variable, so q Gauss points
    per direction with 2q-1 >= d+1 suffice.
    """
    if degree < 0:
        raise ValueError("quadrature degree must be nonnegative")
    q = (degree + 3) // 2
    x, w = np.polynomial.legendre.leggauss(max(q, 1))
    s = 0.5 * (x + 1.0)
    ws = 0.5 * w
    S, T = np.meshgrid(s, s, indexing="ij")
    WS, WT = np.meshgrid(ws, ws, indexing="ij")
    xs = S.ravel()
    ys = (T * (1.0 - S)).ravel()
    wts = (WS * WT * (1.0 - S)).ravel()
    pts = np.column_stack([xs, ys])
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def p1_shape_segment(pts: np.ndarray) -> np.ndarray:
    """P1 shape function values on reference segment; shape (npts, 2)."""
    return np.column_stack([1.0 - pts, pts])


def p1_shape_triangle(pts: np.ndarray) -> np.ndarray:
    """P1 shape function values on reference triangle; shape (npts, 3)."""
    return np.column_stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]])
