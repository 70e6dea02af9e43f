"""Emitted fluorescence of a trapped ion (or cloud) with a chopped repumper."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .units import WAVELENGTH_422, photon_energy


@dataclass(frozen=True)
class IonSource:
    n_ions: int = 1
    scatter_rate_per_ion: float = 1e7  # photons/s
    wavelength: float = WAVELENGTH_422  # m

    def __post_init__(self):
        if self.n_ions < 1:
            raise ValueError(f"n_ions must be >= 1, got {self.n_ions}")
        if self.scatter_rate_per_ion < 0:
            raise ValueError("scatter_rate_per_ion must be non-negative")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")

    @property
    def photon_rate(self) -> float:
        """Total photons/s into 4 pi."""
        return self.n_ions * self.scatter_rate_per_ion


@dataclass(frozen=True)
class ModulationSpec:
    """Square-wave gating of the fluorescence by the repumper.

    ``depth`` = 1 means fluorescence stops completely while the repumper is
    off (population shelved in D3/2).
    """

    frequency: float = 300.0  # Hz
    duty: float = 0.5
    depth: float = 1.0
    shape: str = "square"

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError("modulation frequency must be positive")
        if not 0 < self.duty <= 1:
            raise ValueError("duty must lie in (0, 1]")
        if not 0 <= self.depth <= 1:
            raise ValueError("depth must lie in [0, 1]")
        if self.shape != "square":
            raise ValueError(f"unsupported modulation shape {self.shape!r}")

    def gate(self, t):
        """1 while the repumper is on, 0 otherwise."""
        phase = np.mod(np.asarray(t, dtype=float) * self.frequency, 1.0)
        return (phase < self.duty).astype(float)

    def envelope(self, t):
        """Relative fluorescence level at time t, in [1 - depth, 1]."""
        return 1.0 - self.depth * (1.0 - self.gate(t))

    @property
    def mean_level(self) -> float:
        return self.duty + (1.0 - self.duty) * (1.0 - self.depth)


def total_emitted_power(src: IonSource) -> float:
    """Fluorescence power into 4 pi, watts."""
    return src.photon_rate * photon_energy(src.wavelength)


def modulated_flux(src: IonSource, mod: ModulationSpec, t):
    """Instantaneous emitted photon rate (photons/s) at time(s) t >= 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    out = src.photon_rate * mod.envelope(t)
    return float(out) if out.ndim == 0 else out


def cycle_average_flux(src: IonSource, mod: ModulationSpec) -> float:
    return src.photon_rate * mod.mean_level


def fundamental_amplitude(src: IonSource, mod: ModulationSpec) -> float:
    """Peak amplitude of the first Fourier harmonic of the flux.

    For a square gate of duty D the harmonic amplitude is
    (2/pi) sin(pi D) times the modulated part of the signal.
    """
    return src.photon_rate * mod.depth * 2.0 / np.pi * np.sin(np.pi * mod.duty)
