"""Parametrised five-wire surface trap.

Centre ground strip |y| < a, RF rails a < |y| < b, and segmented DC electrodes
outside the rails: a middle segment under the ion flanked by two endcaps on
each side. The rest of the plane is grounded.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..units import E_CHARGE, SR88_MASS
from .layout import RectElectrode, Role, TrapLayout

DEFAULT_RF_ANGULAR_FREQUENCY = 2 * np.pi * 35e6


@dataclass(frozen=True)
class FiveWireTemplate:
    center_width: float = 103e-6  # 2a
    rf_width: float = 223e-6  # b - a
    rf_amplitude: float = 87.0
    endcap_voltage: float = 16.6
    middle_dc_voltage: float = -11.1
    center_voltage: float = 0.0
    dc_width: float = 182e-6
    middle_dc_length: float = 379e-6
    endcap_length: float = 206e-6
    rail_length: float = 4000e-6
    rf_angular_frequency: float = DEFAULT_RF_ANGULAR_FREQUENCY
    ion_mass: float = SR88_MASS
    ion_charge: float = E_CHARGE

    FREE_PARAMETERS = ("center_width", "rf_width", "rf_amplitude", "endcap_voltage")

    @property
    def inner_edge(self) -> float:
        return 0.5 * self.center_width

    @property
    def outer_edge(self) -> float:
        return self.inner_edge + self.rf_width

    def analytic_height(self) -> float:
        """RF null height sqrt(a*b) of infinitely long symmetric rails."""
        return float(np.sqrt(self.inner_edge * self.outer_edge))

    def with_params(self, **kw) -> "FiveWireTemplate":
        return replace(self, **kw)

    def layout(self) -> TrapLayout:
        a, b = self.inner_edge, self.outer_edge
        half_rail = 0.5 * self.rail_length
        m = 0.5 * self.middle_dc_length
        e = m + self.endcap_length
        if e > half_rail:
            raise ValueError("DC segments extend beyond the RF rails")
        c = b + self.dc_width
        es = [
            RectElectrode(-half_rail, half_rail, -a, a, Role.GROUND, self.center_voltage, "center"),
            RectElectrode(-half_rail, half_rail, a, b, Role.RF, 1.0, "rf_top"),
            RectElectrode(-half_rail, half_rail, -b, -a, Role.RF, 1.0, "rf_bottom"),
        ]
        for side, (y0, y1) in (("top", (b, c)), ("bottom", (-c, -b))):
            es += [
                RectElectrode(-m, m, y0, y1, Role.DC, self.middle_dc_voltage, f"dc_mid_{side}"),
                RectElectrode(-e, -m, y0, y1, Role.DC, self.endcap_voltage, f"dc_left_{side}"),
                RectElectrode(m, e, y0, y1, Role.DC, self.endcap_voltage, f"dc_right_{side}"),
            ]
        return TrapLayout(tuple(es), self.rf_amplitude, self.rf_angular_frequency,
                          self.ion_mass, self.ion_charge)
