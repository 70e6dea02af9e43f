"""Physical constants and photon/detector conversions.

Everything inside the package is SI. Pretty units (pA, pW, meV, MHz) only
appear where results are printed.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA 2018 exact/recommended values."""

    planck_constant: float = 6.62607015e-34  # J s
    speed_of_light: float = 299792458.0  # m/s
    elementary_charge: float = 1.602176634e-19  # C
    atomic_mass_unit: float = 1.66053906660e-27  # kg
    boltzmann_constant: float = 1.380649e-23  # J/K

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value!r}")

    @property
    def sr88_mass(self) -> float:
        return 87.9056 * self.atomic_mass_unit


CODATA2018 = PhysicalConstants()

H = CODATA2018.planck_constant
C = CODATA2018.speed_of_light
E_CHARGE = CODATA2018.elementary_charge
AMU = CODATA2018.atomic_mass_unit
K_B = CODATA2018.boltzmann_constant
SR88_MASS = CODATA2018.sr88_mass

# Sr+ 5S1/2 <-> 5P1/2 detection line
WAVELENGTH_422 = 422e-9


@dataclass(frozen=True)
class Wavelength:
    value: float  # m

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError(f"wavelength must be positive, got {self.value!r}")

    def __float__(self):
        return float(self.value)


def _wavelength_m(wavelength) -> float:
    lam = float(wavelength)
    if not lam > 0:
        raise ValueError(f"wavelength must be positive, got {lam!r}")
    return lam


def photon_energy(wavelength) -> float:
    """Photon energy h*c/lambda in joules. Accepts a float (m) or Wavelength."""
    return H * C / _wavelength_m(wavelength)


def responsivity_to_qe(responsivity: float, wavelength) -> float:
    """Quantum efficiency equivalent of a responsivity in A/W."""
    if responsivity < 0:
        raise ValueError(f"responsivity must be non-negative, got {responsivity!r}")
    return responsivity * photon_energy(wavelength) / E_CHARGE


def qe_to_responsivity(qe: float, wavelength) -> float:
    """Inverse of :func:`responsivity_to_qe`."""
    if qe < 0:
        raise ValueError(f"quantum efficiency must be non-negative, got {qe!r}")
    return qe * E_CHARGE / photon_energy(wavelength)


def photon_rate(power: float, wavelength) -> float:
    """Photons per second carried by an optical power in watts."""
    if power < 0:
        raise ValueError(f"power must be non-negative, got {power!r}")
    return power / photon_energy(wavelength)
