"""Electrode layouts, superposed potentials and the RF pseudopotential."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from ..units import E_CHARGE, SR88_MASS
from .basis import rect_basis

SCHEMA = "trap-layout/1"


class Role(str, Enum):
    RF = "RF"
    DC = "DC"
    GROUND = "GROUND"


@dataclass(frozen=True)
class RectElectrode:
    """Axis-aligned electrode in the z = 0 plane.

    For RF electrodes ``voltage`` is a relative weight on the layout's
    ``rf_amplitude`` (1.0 for an ordinary rail).
    """

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    role: Role = Role.DC
    voltage: float = 0.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate electrode {self.name or ''}: "
                             f"x [{self.x_min}, {self.x_max}], y [{self.y_min}, {self.y_max}]")

    @property
    def bounds(self):
        return (self.x_min, self.x_max, self.y_min, self.y_max)

    def overlaps(self, other: "RectElectrode") -> bool:
        return (min(self.x_max, other.x_max) > max(self.x_min, other.x_min)
                and min(self.y_max, other.y_max) > max(self.y_min, other.y_min))

    def translated(self, dx=0.0, dy=0.0):
        return replace(self, x_min=self.x_min + dx, x_max=self.x_max + dx,
                       y_min=self.y_min + dy, y_max=self.y_max + dy)

    def scaled(self, s):
        return replace(self, x_min=self.x_min * s, x_max=self.x_max * s,
                       y_min=self.y_min * s, y_max=self.y_max * s)


@dataclass(frozen=True)
class TrapLayout:
    electrodes: tuple
    rf_amplitude: float
    rf_angular_frequency: float
    ion_mass: float = SR88_MASS
    ion_charge: float = E_CHARGE
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "electrodes", tuple(self.electrodes))
        if not any(e.role is Role.RF for e in self.electrodes):
            raise ValueError("layout needs at least one RF electrode")
        if not self.rf_angular_frequency > 0:
            raise ValueError("rf_angular_frequency must be positive")
        if not (self.ion_mass > 0 and self.ion_charge != 0):
            raise ValueError("ion mass must be positive and charge non-zero")
        es = self.electrodes
        for i in range(len(es)):
            for j in range(i + 1, len(es)):
                if es[i].overlaps(es[j]):
                    raise ValueError(f"electrodes {es[i].name or i} and {es[j].name or j} overlap")

    # arrays are rebuilt lazily; the dataclass itself stays immutable
    def _arrays(self):
        if "rects" not in self._cache:
            rects = np.array([e.bounds for e in self.electrodes])
            rf = np.array([e.voltage if e.role is Role.RF else 0.0 for e in self.electrodes])
            dc = np.array([e.voltage if e.role is not Role.RF else 0.0 for e in self.electrodes])
            self._cache.update(rects=rects, rf=rf * self.rf_amplitude, dc=dc)
        return self._cache["rects"], self._cache["rf"], self._cache["dc"]

    @property
    def pseudo_prefactor(self) -> float:
        """q^2 / (4 m Omega^2), converting |grad V_rf|^2 to joules."""
        return self.ion_charge ** 2 / (4.0 * self.ion_mass * self.rf_angular_frequency ** 2)

    def with_rf_amplitude(self, amplitude: float) -> "TrapLayout":
        return replace(self, rf_amplitude=amplitude)

    def with_dc_scaled(self, s: float) -> "TrapLayout":
        es = [e if e.role is Role.RF else replace(e, voltage=e.voltage * s) for e in self.electrodes]
        return replace(self, electrodes=tuple(es))

    def translated(self, dx=0.0, dy=0.0) -> "TrapLayout":
        return replace(self, electrodes=tuple(e.translated(dx, dy) for e in self.electrodes))

    def scaled(self, s: float) -> "TrapLayout":
        return replace(self, electrodes=tuple(e.scaled(s) for e in self.electrodes))

    @property
    def extent(self) -> float:
        """Largest electrode dimension, used as a length scale."""
        r, _, _ = self._arrays()
        return float(max(np.max(r[:, 1] - r[:, 0]), np.max(r[:, 3] - r[:, 2])))


def unit_potential(electrode: RectElectrode, point):
    """Potential at ``point`` with ``electrode`` at 1 V and the plane grounded."""
    (phi,) = rect_basis([electrode.bounds], point)
    out = phi[0]
    return float(out) if out.ndim == 0 else out


def _superpose(layout: TrapLayout, point, weights_key: str, order: int):
    rects, rf, dc = layout._arrays()
    w = rf if weights_key == "rf" else dc
    parts = rect_basis(rects, point, order=order)
    return tuple(np.tensordot(w, part, axes=(0, 0)) for part in parts)


def potential(layout: TrapLayout, point):
    """Static (DC + ground) potential in volts."""
    return _superpose(layout, point, "dc", 0)[0]


def static_field_gradient(layout: TrapLayout, point):
    """Gradient of the static potential, V/m."""
    return _superpose(layout, point, "dc", 1)[1]


def rf_potential(layout: TrapLayout, point):
    """RF potential amplitude in volts."""
    return _superpose(layout, point, "rf", 0)[0]


def rf_field_gradient(layout: TrapLayout, point):
    """Gradient of the RF potential amplitude, V/m."""
    return _superpose(layout, point, "rf", 1)[1]


def rf_hessian(layout: TrapLayout, point):
    """Second derivatives of the RF potential amplitude, V/m^2."""
    return _superpose(layout, point, "rf", 2)[2]


def pseudopotential(layout: TrapLayout, point, include_static: bool = True):
    """Ponderomotive potential plus q*V_dc, in eV.

    Energies are quoted as J / e, so an ion of charge +e sees the static term
    as exactly its potential in volts.
    """
    g = rf_field_gradient(layout, point)
    u = layout.pseudo_prefactor * np.sum(g * g, axis=-1)
    if include_static:
        u = u + layout.ion_charge * potential(layout, point)
    return u / E_CHARGE


def pseudopotential_gradient(layout: TrapLayout, point, include_static: bool = True):
    """Analytic gradient of :func:`pseudopotential`, eV/m."""
    _, g, h = _superpose(layout, point, "rf", 2)
    grad = 2.0 * layout.pseudo_prefactor * np.einsum("...ij,...j->...i", h, g)
    if include_static:
        grad = grad + layout.ion_charge * static_field_gradient(layout, point)
    return grad / E_CHARGE


def pseudopotential_hessian(layout: TrapLayout, point, step: float | None = None,
                            include_static: bool = True, return_error: bool = False):
    """Hessian of the pseudopotential in eV/m^2.

    Central differences of the analytic gradient, Richardson-extrapolated from
    steps ``step`` and ``step/2``. The difference between the two levels is the
    convergence estimate returned with ``return_error``.
    """
    p = np.asarray(point, dtype=float)
    if step is None:
        step = 1e-3 * p[2]

    def central(hh):
        cols = []
        for j in range(3):
            d = np.zeros(3)
            d[j] = hh
            gp = pseudopotential_gradient(layout, p + d, include_static)
            gm = pseudopotential_gradient(layout, p - d, include_static)
            cols.append((gp - gm) / (2 * hh))
        m = np.array(cols).T
        return 0.5 * (m + m.T)

    d1 = central(step)
    d2 = central(step / 2)
    hess = (4.0 * d2 - d1) / 3.0
    if return_error:
        return hess, float(np.max(np.abs(hess - d2)))
    return hess
