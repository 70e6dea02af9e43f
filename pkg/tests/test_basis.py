"""Rectangle basis against quadrature, finite differences and Laplace's equation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from iontrap.electrostatics.basis import rect_basis, rect_solid_angle

coord = st.floats(-300e-6, 300e-6)
size = st.floats(10e-6, 400e-6)
height = st.floats(20e-6, 300e-6)


def quad_potential(rect, p):
    """Green's-function integral z / (2 pi) * dA / r^3 over the rectangle."""
    x0, x1, y0, y1 = rect
    px, py, z = p
    val, _ = integrate.dblquad(lambda y, x: z / ((x - px) ** 2 + (y - py) ** 2 + z * z) ** 1.5,
                               x0, x1, y0, y1, epsabs=0, epsrel=1e-11)
    return val / (2 * np.pi)


@pytest.mark.parametrize("rect,p", [
    ((-50e-6, 50e-6, -50e-6, 50e-6), (0, 0, 100e-6)),
    ((10e-6, 200e-6, -30e-6, 80e-6), (-40e-6, 20e-6, 60e-6)),
    ((-1e-3, 1e-3, 60e-6, 220e-6), (0, 0, 115e-6)),
])
def test_matches_quadrature(rect, p):
    (phi,) = rect_basis([rect], p)
    assert phi[0] == pytest.approx(quad_potential(rect, p), rel=1e-9)


def test_square_under_point_closed_form():
    # a square of side 2a centred below the point subtends 4 asin(a^2 / (a^2 + z^2))
    a, z = 50e-6, 100e-6
    omega = 4 * np.arcsin(a * a / (a * a + z * z))
    assert rect_solid_angle(-a, a, -a, a, (0, 0, z)) == pytest.approx(omega, rel=1e-13)


def test_completeness():
    # a 100 x 100 tiling of a large square covers almost all of the plane
    edges = np.linspace(-0.2, 0.2, 101)
    rects = [(edges[i], edges[i + 1], edges[j], edges[j + 1]) for i in range(100) for j in range(100)]
    (phi,) = rect_basis(rects, (3e-6, -7e-6, 100e-6))
    assert abs(phi.sum() - 1.0) < 1e-3


@settings(max_examples=60, deadline=None)
@given(coord, coord, size, size, coord, coord, height)
def test_gradient_matches_finite_difference(x0, y0, w, h, px, py, z):
    rect = (x0, x0 + w, y0, y0 + h)
    p = np.array([px, py, z])
    _, g = rect_basis([rect], p, order=1)
    step = 1e-4 * z
    fd = np.zeros(3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = step
        # fourth-order central difference
        f = [rect_basis([rect], p + c * e)[0][0] for c in (-2, -1, 1, 2)]
        fd[k] = (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * step)
    scale = np.max(np.abs(g)) + 1e-30
    assert np.max(np.abs(g[0] - fd)) / scale < 1e-6


@settings(max_examples=60, deadline=None)
@given(coord, coord, size, size, coord, coord, height)
def test_hessian_is_traceless_and_matches_gradient_fd(x0, y0, w, h, px, py, z):
    rect = (x0, x0 + w, y0, y0 + h)
    p = np.array([px, py, z])
    _, _, H = rect_basis([rect], p, order=2)
    H = H[0]
    scale = np.max(np.abs(H)) + 1e-30
    assert abs(np.trace(H)) / scale < 1e-6
    assert np.allclose(H, H.T, atol=1e-12 * scale)
    step = 1e-4 * z
    for k in range(3):
        e = np.zeros(3)
        e[k] = step
        gp = rect_basis([rect], p + e, order=1)[1][0]
        gm = rect_basis([rect], p - e, order=1)[1][0]
        assert np.max(np.abs((gp - gm) / (2 * step) - H[k])) / scale < 1e-5


@settings(max_examples=40, deadline=None)
@given(coord, coord, size, size, coord, coord, height)
def test_bounded_and_additive(x0, y0, w, h, px, py, z):
    p = (px, py, z)
    whole = rect_basis([(x0, x0 + w, y0, y0 + h)], p)[0][0]
    halves = rect_basis([(x0, x0 + w / 2, y0, y0 + h), (x0 + w / 2, x0 + w, y0, y0 + h)], p)[0]
    assert 0 <= whole <= 1
    assert halves.sum() == pytest.approx(whole, rel=1e-10, abs=1e-15)


def test_rejects_points_on_plane():
    with pytest.raises(ValueError):
        rect_basis([(0, 1, 0, 1)], (0, 0, 0))
    with pytest.raises(ValueError):
        rect_basis([(0, 1, 0, 1)], (0, 0))
