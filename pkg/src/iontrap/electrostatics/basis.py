"""Gapless-plane potential of a rectangular electrode.

A rectangle held at 1 V in an otherwise grounded infinite plane produces, at a
point above the plane, a potential equal to the solid angle it subtends
divided by 2*pi. Summing the corner terms

    F(X, Y, z) = atan(X * Y / (z * sqrt(X**2 + Y**2 + z**2)))

with alternating signs gives the closed form; derivatives below are exact.
"""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


def _as_points(points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    if p.shape[-1] != 3:
        raise ValueError(f"points must have trailing dimension 3, got shape {p.shape}")
    if np.any(p[..., 2] <= 0):
        raise ValueError("potential is only defined above the electrode plane (z > 0)")
    return p


def rect_basis(rects, points, order: int = 0):
    """Unit potentials of rectangles at points, plus derivatives.

    :param rects: array (N, 4) of (x_min, x_max, y_min, y_max) in metres
    :param points: array (..., 3), every z > 0
    :param order: 0 for values only, 1 adds gradients, 2 adds Hessians
    :returns: tuple of arrays shaped (N, ...), (N, ..., 3), (N, ..., 3, 3)
        truncated to ``order + 1`` entries
    """
    rects = np.atleast_2d(np.asarray(rects, dtype=float))
    p = _as_points(points)
    lead = p.shape[:-1]
    p = p.reshape(-1, 3)
    px, py, z = p[:, 0], p[:, 1], p[:, 2]

    n = rects.shape[0]
    m = p.shape[0]
    phi = np.zeros((n, m))
    grad = np.zeros((n, m, 3)) if order >= 1 else None
    hess = np.zeros((n, m, 3, 3)) if order >= 2 else None

    z2 = z * z
    for xi, sx in ((1, -1.0), (0, 1.0)):
        X = px[None, :] - rects[:, xi][:, None]
        for yi, sy in ((3, -1.0), (2, 1.0)):
            Y = py[None, :] - rects[:, yi][:, None]
            # sign (-1)^(i+j) with i, j = 1 for the min edges, 2 for the max edges
            s = sx * sy
            R2 = X * X + Y * Y + z2
            R = np.sqrt(R2)
            phi += s * np.arctan2(X * Y, z * R)
            if order < 1:
                continue
            A = X * X + z2
            B = Y * Y + z2
            gx = Y * z / (R * A)
            gy = X * z / (R * B)
            gz = -X * Y * (R2 + z2) / (R * A * B)
            grad[..., 0] += s * gx
            grad[..., 1] += s * gy
            grad[..., 2] += s * gz
            if order < 2:
                continue
            R3 = R2 * R
            hxx = -X * Y * z * (A + 2.0 * R2) / (R3 * A * A)
            hyy = -X * Y * z * (B + 2.0 * R2) / (R3 * B * B)
            hxy = z / R3
            hxz = Y * (R2 * A - z2 * A - 2.0 * z2 * R2) / (R3 * A * A)
            hyz = X * (R2 * B - z2 * B - 2.0 * z2 * R2) / (R3 * B * B)
            # F is harmonic, so d2F/dz2 = -(d2F/dX2 + d2F/dY2) identically
            hzz = -(hxx + hyy)
            hess[..., 0, 0] += s * hxx
            hess[..., 1, 1] += s * hyy
            hess[..., 2, 2] += s * hzz
            hess[..., 0, 1] += s * hxy
            hess[..., 1, 0] += s * hxy
            hess[..., 0, 2] += s * hxz
            hess[..., 2, 0] += s * hxz
            hess[..., 1, 2] += s * hyz
            hess[..., 2, 1] += s * hyz

    out = [phi.reshape((n,) + lead) / TWO_PI]
    if order >= 1:
        out.append(grad.reshape((n,) + lead + (3,)) / TWO_PI)
    if order >= 2:
        out.append(hess.reshape((n,) + lead + (3, 3)) / TWO_PI)
    return tuple(out)


def rect_solid_angle(x_min, x_max, y_min, y_max, point) -> float:
    """Solid angle (sr) subtended by a rectangle in the z=0 plane."""
    (phi,) = rect_basis([(x_min, x_max, y_min, y_max)], point)
    return float(TWO_PI * phi.reshape(-1)[0])
