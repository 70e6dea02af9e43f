"""Trap minimum, secular frequencies and escape-saddle depth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ..units import E_CHARGE
from .layout import (
    TrapLayout,
    pseudopotential,
    pseudopotential_gradient,
    pseudopotential_hessian,
    rf_hessian,
)


class TrapError(RuntimeError):
    """Base class for solver failures that carry diagnostics."""

    def __init__(self, message, **info):
        super().__init__(message)
        self.info = info


class ConvergenceError(TrapError):
    pass


class InvalidLayoutError(TrapError):
    pass


class UnstableTrapError(TrapError):
    pass


class UnboundedSearchError(TrapError):
    pass


@dataclass(frozen=True)
class TrapSolution:
    minimum_position: tuple
    secular_frequencies: tuple  # Hz, ascending
    principal_axes: tuple  # unit vectors matching secular_frequencies
    trap_depth: float  # eV, total (RF + static)
    rf_only_depth: float  # eV, along the same escape path with DC off
    escape_position: tuple
    mathieu_q: float
    gradient_norm: float
    escape_is_saddle: bool

    def as_dict(self):
        return {
            "minimum_position_m": list(self.minimum_position),
            "secular_frequencies_Hz": list(self.secular_frequencies),
            "principal_axes": [list(a) for a in self.principal_axes],
            "trap_depth_eV": self.trap_depth,
            "rf_only_depth_eV": self.rf_only_depth,
            "escape_position_m": list(self.escape_position),
            "mathieu_q": self.mathieu_q,
            "gradient_norm_eV_per_m": self.gradient_norm,
            "escape_is_saddle": self.escape_is_saddle,
        }


def _length_scale(layout: TrapLayout, guess) -> float:
    return float(abs(guess[2]))


def gradient_scale(layout: TrapLayout, length: float) -> float:
    """Characteristic pseudopotential gradient (eV/m) at a given length scale.

    Energy scale is q^2 (V_rf / L)^2 / (4 m Omega^2), plus the largest static
    voltage; divided by L.
    """
    v_dc = max((abs(e.voltage) for e in layout.electrodes if e.role.value != "RF"), default=0.0)
    e_rf = layout.pseudo_prefactor * (layout.rf_amplitude / length) ** 2 / E_CHARGE
    return (e_rf + abs(layout.ion_charge / E_CHARGE) * v_dc) / length


def find_minimum(layout: TrapLayout, initial_guess, gtol: float = 1e-9, max_iter: int = 200):
    """Local minimum of the total pseudopotential.

    Quasi-Newton (BFGS with line search) on length-normalised coordinates, then
    Newton polishing until the gradient norm is below ``gtol`` times
    :func:`gradient_scale`.
    """
    x0 = np.asarray(initial_guess, dtype=float)
    if not x0[2] > 0:
        raise InvalidLayoutError("initial guess must lie above the trap plane", guess=x0.tolist())
    L = _length_scale(layout, x0)
    gs = gradient_scale(layout, L)
    escale = gs * L

    def f(u):
        p = u * L
        if p[2] <= 0:
            return np.inf
        return float(pseudopotential(layout, p)) / escale

    def g(u):
        p = u * L
        if p[2] <= 0:
            return np.full(3, np.nan)
        return pseudopotential_gradient(layout, p) * L / escale

    res = optimize.minimize(f, x0 / L, jac=g, method="BFGS",
                            options={"gtol": 1e-10, "maxiter": max_iter})
    p = res.x * L
    if p[2] <= 0 or not np.all(np.isfinite(p)):
        raise InvalidLayoutError("minimum search left the half-space z > 0", best=p.tolist())

    # Newton polish with the Richardson Hessian
    for _ in range(20):
        grad = pseudopotential_gradient(layout, p)
        if np.linalg.norm(grad) < gtol * gs:
            break
        hess = pseudopotential_hessian(layout, p)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        if np.linalg.norm(step) > 0.1 * p[2]:
            step *= 0.1 * p[2] / np.linalg.norm(step)
        p = p - step
        if p[2] <= 0:
            raise InvalidLayoutError("minimum found at or below the trap plane", best=p.tolist())

    gnorm = float(np.linalg.norm(pseudopotential_gradient(layout, p)))
    if not gnorm < gtol * gs:
        raise ConvergenceError("minimum search did not converge", best=p.tolist(),
                               gradient_norm=gnorm, tolerance=gtol * gs)
    return p


def secular_frequencies(layout: TrapLayout, minimum, return_axes: bool = False):
    """Secular frequencies (Hz, ascending) from the Hessian eigenvalues."""
    p = np.asarray(minimum, dtype=float)
    hess = pseudopotential_hessian(layout, p) * E_CHARGE  # J/m^2
    w, v = np.linalg.eigh(hess)
    if np.any(w <= 0):
        k = int(np.argmin(w))
        raise UnstableTrapError("non-positive curvature at trap minimum",
                                axis=v[:, k].tolist(), eigenvalue=float(w[k]))
    freqs = np.sqrt(w / layout.ion_mass) / (2 * np.pi)
    if return_axes:
        return freqs, v.T
    return freqs


def mathieu_q(layout: TrapLayout, point) -> float:
    """Largest |q| = 2 q_ion * kappa / (m Omega^2) over the RF curvature eigenvalues."""
    h = rf_hessian(layout, np.asarray(point, dtype=float))
    kappa = np.max(np.abs(np.linalg.eigvalsh(h)))
    return float(2 * abs(layout.ion_charge) * kappa / (layout.ion_mass * layout.rf_angular_frequency ** 2))


def _relax_transverse(layout, z, xy0, include_static=True):
    def f(xy):
        return float(pseudopotential(layout, (xy[0], xy[1], z), include_static))

    def g(xy):
        return pseudopotential_gradient(layout, (xy[0], xy[1], z), include_static)[:2]

    scale = z
    res = optimize.minimize(lambda u: f(u * scale), np.asarray(xy0) / scale,
                            jac=lambda u: g(u * scale) * scale, method="BFGS",
                            options={"gtol": 1e-12 * max(1.0, abs(f(np.asarray(xy0))))})
    return res.x * scale, float(res.fun)


def escape_profile(layout: TrapLayout, minimum, z_values, include_static=True):
    """Potential along the vertical line through ``minimum`` (no relaxation)."""
    p = np.asarray(minimum, dtype=float)
    pts = np.column_stack([np.full_like(z_values, p[0]), np.full_like(z_values, p[1]), z_values])
    return pseudopotential(layout, pts, include_static)


def trap_depth(layout: TrapLayout, minimum, search_factor: float = 10.0,
               n_coarse: int = 400, include_static: bool = True):
    """Depth (eV) and escape point, searching upward from the minimum.

    The vertical line above the minimum is sampled to bracket the barrier,
    the barrier height is maximised in 1-D with the transverse coordinates
    relaxed to their minimum at each height, and the result is checked to be
    a first-order saddle.
    """
    p = np.asarray(minimum, dtype=float)
    u_min = float(pseudopotential(layout, p, include_static))
    z_top = search_factor * p[2]
    zs = np.linspace(p[2], z_top, n_coarse)
    prof = escape_profile(layout, p, zs, include_static)
    k = int(np.argmax(prof))
    if k == 0 or k == n_coarse - 1:
        raise UnboundedSearchError("no escape barrier above the minimum within the search bound",
                                   z_top=z_top)

    xy = p[:2].copy()
    cache = {}

    def neg_relaxed(z):
        nonlocal xy
        xy_new, u = _relax_transverse(layout, z, xy, include_static)
        xy = xy_new
        cache[z] = (xy_new.copy(), u)
        return -u

    res = optimize.minimize_scalar(neg_relaxed, bracket=(zs[k - 1], zs[k], zs[k + 1]),
                                   tol=1e-10)
    z_s = float(res.x)
    if not p[2] < z_s < zs[-2]:
        raise UnboundedSearchError("escape barrier lies at the search bound", z_top=z_top, z_found=z_s)
    xy_s, u_s = cache.get(z_s) or _relax_transverse(layout, z_s, xy, include_static)
    saddle = np.array([xy_s[0], xy_s[1], z_s])
    return u_s - u_min, saddle


def is_first_order_saddle(layout: TrapLayout, point, include_static=True) -> bool:
    w = np.linalg.eigvalsh(pseudopotential_hessian(layout, point, include_static=include_static))
    scale = np.max(np.abs(w))
    return bool(np.sum(w < -1e-9 * scale) == 1)


def rf_only_depth(layout: TrapLayout, near) -> float:
    """Ponderomotive depth alone, measured from the RF null closest to ``near``."""
    rf = layout.with_dc_scaled(0.0)
    try:
        null = find_minimum(rf, near)
        depth, _ = trap_depth(rf, null, include_static=False)
    except TrapError:
        return float("nan")
    return float(depth)


def solve(layout: TrapLayout, initial_guess) -> TrapSolution:
    """Minimum, frequencies and depth for a layout in one call."""
    p = find_minimum(layout, initial_guess)
    freqs, axes = secular_frequencies(layout, p, return_axes=True)
    depth, saddle = trap_depth(layout, p)
    rf_depth = rf_only_depth(layout, p)
    gnorm = float(np.linalg.norm(pseudopotential_gradient(layout, p)))
    return TrapSolution(
        minimum_position=tuple(float(v) for v in p),
        secular_frequencies=tuple(float(f) for f in freqs),
        principal_axes=tuple(tuple(float(c) for c in a) for a in axes),
        trap_depth=float(depth),
        rf_only_depth=float(rf_depth),
        escape_position=tuple(float(v) for v in saddle),
        mathieu_q=mathieu_q(layout, p),
        gradient_norm=gnorm,
        escape_is_saddle=is_first_order_saddle(layout, saddle),
    )
