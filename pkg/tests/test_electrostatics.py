import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iontrap.electrostatics import solver
from iontrap.electrostatics.basis import rect_basis
from iontrap.electrostatics.fivewire import FiveWireTemplate
from iontrap.electrostatics.layout import (
    RectElectrode,
    Role,
    TrapLayout,
    potential,
    pseudopotential,
    pseudopotential_gradient,
    pseudopotential_hessian,
)

# short rails: the rail ends close the well along x without any DC
RF_ONLY = FiveWireTemplate(center_width=120e-6, rf_width=160e-6, rf_amplitude=100.0, endcap_voltage=0.0,
                           middle_dc_voltage=0.0, rail_length=1.5e-3, middle_dc_length=200e-6,
                           endcap_length=500e-6)


def seed(t):
    return (0.0, 0.0, t.analytic_height())


def test_rf_null_height_matches_long_rail_formula(long_rail_template):
    t = long_rail_template
    p = solver.find_minimum(t.layout(), seed(t))
    assert p[2] == pytest.approx(t.analytic_height(), rel=1e-3)
    assert np.hypot(p[0], p[1]) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.floats(-150e-6, 150e-6), st.floats(-150e-6, 150e-6), st.floats(40e-6, 250e-6))
def test_pseudopotential_gradient_matches_fd(px, py, z):
    lay = FiveWireTemplate().layout()
    p = np.array([px, py, z])
    g = pseudopotential_gradient(lay, p)
    h = 1e-5 * z
    fd = np.array([(pseudopotential(lay, p + h * e) - pseudopotential(lay, p - h * e)) / (2 * h)
                   for e in np.eye(3)])
    # the central difference carries O(h^2) truncation error; compare in scale
    assert np.max(np.abs(g - fd)) / np.max(np.abs(g)) < 1e-6


def test_static_potential_is_harmonic():
    lay = FiveWireTemplate().layout()
    rects = np.array([e.bounds for e in lay.electrodes])
    volts = np.array([e.voltage for e in lay.electrodes])
    p = np.array([13e-6, -21e-6, 95e-6])
    _, _, hess = rect_basis(rects, p, order=2)
    H = np.tensordot(volts, hess, axes=1)
    assert abs(np.trace(H)) / np.max(np.abs(H)) < 1e-6
    # independent check: fourth-order finite-difference Laplacian
    h = 1e-6
    lap = 0.0
    for e in np.eye(3):
        f = [potential(lay, p + c * h * e) for c in (-2, -1, 0, 1, 2)]
        lap += (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h * h)
    assert abs(lap) / np.max(np.abs(H)) < 1e-6


def test_hessian_symmetric_and_richardson_error_small(confining_template):
    lay = confining_template.layout()
    p = solver.find_minimum(lay, seed(confining_template))
    H, err = pseudopotential_hessian(lay, p, return_error=True)
    assert np.allclose(H, H.T, rtol=0, atol=1e-9 * np.max(np.abs(H)))
    assert np.max(np.abs(err)) / np.max(np.abs(H)) < 1e-5


def test_gradient_zero_at_minimum(confining_template):
    lay = confining_template.layout()
    p = solver.find_minimum(lay, seed(confining_template))
    scale = solver.gradient_scale(lay, p[2])
    assert np.linalg.norm(pseudopotential_gradient(lay, p)) < 1e-9 * scale


@pytest.mark.parametrize("factor", [0.5, 2.0, 3.0])
def test_frequency_linear_and_depth_quadratic_in_rf_voltage(factor):
    base = solver.solve(RF_ONLY.layout(), seed(RF_ONLY))
    scaled = solver.solve(RF_ONLY.with_params(rf_amplitude=factor * RF_ONLY.rf_amplitude).layout(), seed(RF_ONLY))
    np.testing.assert_allclose(scaled.secular_frequencies, factor * np.array(base.secular_frequencies), rtol=1e-2)
    assert scaled.trap_depth == pytest.approx(factor ** 2 * base.trap_depth, rel=1e-2)
    assert scaled.mathieu_q == pytest.approx(factor * base.mathieu_q, rel=1e-2)


def test_rf_only_solution_consistent():
    s = solver.solve(RF_ONLY.layout(), seed(RF_ONLY))
    assert s.escape_is_saddle
    assert s.trap_depth == pytest.approx(s.rf_only_depth, rel=1e-9)
    assert s.escape_position[2] > s.minimum_position[2]
    assert s.secular_frequencies == tuple(sorted(s.secular_frequencies))
    # axes are orthonormal
    ax = np.array(s.principal_axes)
    np.testing.assert_allclose(ax @ ax.T, np.eye(3), atol=1e-9)


def test_translation_invariance():
    lay = RF_ONLY.layout()
    a = solver.solve(lay, seed(RF_ONLY))
    b = solver.solve(lay.translated(37e-6, -11e-6), (37e-6, -11e-6, RF_ONLY.analytic_height()))
    np.testing.assert_allclose(np.array(b.minimum_position) - [37e-6, -11e-6, 0], a.minimum_position, atol=1e-10)
    np.testing.assert_allclose(b.secular_frequencies, a.secular_frequencies, rtol=1e-6)


def test_geometric_scaling():
    # lengths x s at fixed voltages: curvature and depth scale as s^-4 and s^-2
    s = 2.0
    a = solver.solve(RF_ONLY.layout(), seed(RF_ONLY))
    b = solver.solve(RF_ONLY.layout().scaled(s), (0, 0, s * RF_ONLY.analytic_height()))
    assert b.minimum_position[2] == pytest.approx(s * a.minimum_position[2], rel=1e-6)
    np.testing.assert_allclose(b.secular_frequencies, np.array(a.secular_frequencies) / s ** 2, rtol=1e-3)
    assert b.trap_depth == pytest.approx(a.trap_depth / s ** 2, rel=1e-3)


def test_mathieu_q_small_at_35_mhz_drive(confining_template):
    s = solver.solve(confining_template.layout(), seed(confining_template))
    assert 0 < s.mathieu_q < 0.3


def test_invalid_guess_rejected():
    with pytest.raises(solver.InvalidLayoutError):
        solver.find_minimum(RF_ONLY.layout(), (0, 0, -1e-6))


def test_unstable_axis_reported():
    # RF rails with a strongly repelling DC pad under the ion: no 3-D minimum
    t = RF_ONLY.with_params(middle_dc_voltage=20.0, endcap_voltage=-20.0)
    with pytest.raises(solver.TrapError):
        solver.solve(t.layout(), seed(t))


def test_layout_validation():
    rf = RectElectrode(-1e-3, 1e-3, 50e-6, 150e-6, Role.RF, 1.0, "rf")
    with pytest.raises(ValueError, match="RF"):
        TrapLayout((RectElectrode(0, 1e-3, 0, 1e-3, Role.DC, 1.0),), 100.0, 1e8)
    with pytest.raises(ValueError, match="overlap"):
        TrapLayout((rf, RectElectrode(0, 1e-3, 100e-6, 300e-6, Role.DC, 1.0)), 100.0, 1e8)
    with pytest.raises(ValueError):
        TrapLayout((rf,), 100.0, 0.0)
    with pytest.raises(ValueError):
        RectElectrode(1.0, 0.0, 0.0, 1.0)


def test_template_rejects_segments_longer_than_rails():
    with pytest.raises(ValueError):
        FiveWireTemplate(rail_length=500e-6).layout()
