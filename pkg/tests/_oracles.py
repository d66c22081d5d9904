"""Independent dense-quadrature oracles for the coupling integrals.

These deliberately avoid the library's assembly path: plain per-element
Python loops over a subdivided quadrature grid, with P1 interpolants
evaluated from barycentric coordinates directly.
"""

from __future__ import annotations

import numpy as np


def _segment_grid(nsub: int, npts: int):
    x, w = np.polynomial.legendre.leggauss(npts)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    pts, wts = [], []
    for k in range(nsub):
        pts.append((k + x) / nsub)
        wts.append(w / nsub)
    return np.concatenate(pts), np.concatenate(wts)


def _triangle_grid(nsub: int, npts: int):
    """Reference-triangle quadrature on a uniform nsub^2 sub-triangulation."""
    x, w = np.polynomial.legendre.leggauss(npts)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    S, T = np.meshgrid(x, x, indexing="ij")
    base_pts = np.column_stack([S.ravel(), (T * (1.0 - S)).ravel()])
    base_wts = (np.outer(w, w) * (1.0 - S)).ravel()  # area 1/2 total
    pts, wts = [], []
    h = 1.0 / nsub
    for i in range(nsub):
        for j in range(nsub - i):
            v0 = np.array([i, j]) * h
            pts.append(v0 + h * base_pts)
            wts.append(base_wts * h * h)
            if j < nsub - i - 1:
                # downward triangle (i+1,j), (i+1,j+1), (i,j+1)
                v0 = np.array([(i + 1) * h, j * h])
                e1 = np.array([0.0, h])
                e2 = np.array([-h, h])
                pts.append(v0 + np.outer(base_pts[:, 0], e1) + np.outer(base_pts[:, 1], e2))
                wts.append(base_wts * h * h)
    return np.vstack(pts), np.concatenate(wts)


def _element_eval(mesh, full_values, nsub, npts):
    """Yield per element: (shape values (nq, nloc), nodal values, weights*jac,
    global points, constant P1 gradients (nloc, dim))."""
    if mesh.dim == 1:
        ref, wts = _segment_grid(nsub, npts)
        shapes = np.column_stack([1.0 - ref, ref])
    else:
        refpts, wts = _triangle_grid(nsub, npts)
        shapes = np.column_stack([1.0 - refpts[:, 0] - refpts[:, 1],
                                  refpts[:, 0], refpts[:, 1]])
    for conn in mesh.elements:
        coords = mesh.vertices[conn]
        if mesh.dim == 1:
            jac = coords[1, 0] - coords[0, 0]
            grads = np.array([[-1.0 / jac], [1.0 / jac]])
            pts = coords[0] + np.outer(ref, coords[1] - coords[0])
        else:
            e1, e2 = coords[1] - coords[0], coords[2] - coords[0]
            jac = e1[0] * e2[1] - e1[1] * e2[0]
            inv = np.array([[e2[1], -e2[0]], [-e1[1], e1[0]]]) / jac
            g1, g2 = inv[0], inv[1]
            grads = np.vstack([-(g1 + g2), g1, g2])
            pts = coords[0] + np.outer(refpts[:, 0], e1) + np.outer(refpts[:, 1], e2)
        yield conn, shapes, full_values[conn] if full_values is not None else None, \
            wts * abs(jac), pts, grads


def dense_coupling_energy(mesh, u_full, v_full, rho, nsub=40, npts=10) -> float:
    total = 0.0
    for conn, shapes, _, w, _, _ in _element_eval(mesh, None, nsub, npts):
        uq = shapes @ u_full[conn]
        vq = shapes @ v_full[conn]
        total += np.sum((np.abs(uq) ** rho * uq) * (np.abs(vq) ** rho * vq) * w)
    return total / (rho + 1.0)


def dense_coupling_vectors(mesh, u_full, v_full, rho, nsub=40, npts=10):
    fu = np.zeros(mesh.n_vertices)
    fv = np.zeros(mesh.n_vertices)
    for conn, shapes, _, w, _, _ in _element_eval(mesh, None, nsub, npts):
        uq = shapes @ u_full[conn]
        vq = shapes @ v_full[conn]
        au, av = np.abs(uq) ** rho, np.abs(vq) ** rho
        fu[conn] += ((au * av * vq) * w) @ shapes
        fv[conn] += ((au * uq * av) * w) @ shapes
    return fu, fv


def dense_multiplier_form(mesh, a_full, b_full, x0, nsub=40, npts=10) -> float:
    """int a_h (m . grad b_h) dx with m = x - x0, by dense quadrature."""
    x0 = np.atleast_1d(np.asarray(x0, float))
    total = 0.0
    for conn, shapes, _, w, pts, grads in _element_eval(mesh, None, nsub, npts):
        aq = shapes @ a_full[conn]
        grad_b = b_full[conn] @ grads  # constant per element, shape (dim,)
        mdotgrad = (pts - x0) @ grad_b
        total += np.sum(aq * mdotgrad * w)
    return total


def dense_lp_norm(mesh, v_full, p, nsub=40, npts=10) -> float:
    total = 0.0
    for conn, shapes, _, w, _, _ in _element_eval(mesh, None, nsub, npts):
        vq = shapes @ v_full[conn]
        total += np.sum(np.abs(vq) ** p * w)
    return total ** (1.0 / p)
