"""Optical collection, detector response, preamp/lock-in signal and noise.

Covers the photodiode-under-the-trap chain: solid angle through the
transparent trap, film-stack losses, responsivity vs temperature, the
transimpedance/lock-in gain and a seeded Monte Carlo of the demodulated
output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import signal

from .electrostatics.basis import rect_basis
from .fluorescence import IonSource, ModulationSpec, total_emitted_power
from .units import E_CHARGE, K_B, WAVELENGTH_422, photon_energy, qe_to_responsivity, responsivity_to_qe

SCHEMA = "detection-scenario/1"


class ConfigurationError(ValueError):
    pass


# ---------------------------------------------------------------- optics


@dataclass(frozen=True)
class FilmLayer:
    label: str
    thickness: float  # m
    transmission: float  # at 422 nm
    resistivity: Optional[float] = None  # ohm m

    def __post_init__(self):
        if not self.thickness > 0:
            raise ValueError(f"layer {self.label!r}: thickness must be positive")
        if not 0 <= self.transmission <= 1:
            raise ValueError(f"layer {self.label!r}: transmission must lie in [0, 1]")
        if self.resistivity is not None and not self.resistivity > 0:
            raise ValueError(f"layer {self.label!r}: resistivity must be positive")


@dataclass(frozen=True)
class FilmStack:
    layers: tuple = ()
    substrate_transmission: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not 0 <= self.substrate_transmission <= 1:
            raise ValueError("substrate_transmission must lie in [0, 1]")


@dataclass(frozen=True)
class CollectionGeometry:
    """Detector plane below the trap; the aperture is centred under the ion
    unless offset explicitly. Aperture is (x_min, x_max, y_min, y_max)."""

    aperture: tuple
    ion_height_above_surface: float = 100e-6
    substrate_thickness: float = 0.0
    trap_to_detector_gap: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "aperture", tuple(float(v) for v in self.aperture))
        x0, x1, y0, y1 = self.aperture
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"degenerate detector aperture {self.aperture}")
        for name in ("ion_height_above_surface", "substrate_thickness", "trap_to_detector_gap"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def standoff(self) -> float:
        return self.ion_height_above_surface + self.substrate_thickness + self.trap_to_detector_gap


def solid_angle_fraction(g: CollectionGeometry) -> float:
    """Omega / 4 pi of the detector aperture as seen from the ion.

    Same closed form as the electrode basis: with the aperture playing the
    electrode, the unit potential is Omega / 2 pi.
    """
    if not g.standoff > 0:
        raise ValueError("ion-to-detector distance must be positive")
    (phi,) = rect_basis([g.aperture], (0.0, 0.0, g.standoff))
    return float(0.5 * phi.reshape(-1)[0])


def stack_transmission(s: FilmStack) -> float:
    t = s.substrate_transmission
    for layer in s.layers:
        t *= layer.transmission
    return float(t)


def collection_efficiency(g: CollectionGeometry, s: FilmStack, extra_layer: Optional[FilmLayer] = None,
                          extra_area_fraction: float = 0.0) -> float:
    """Solid-angle fraction times stack transmission.

    ``extra_layer`` with ``extra_area_fraction`` optionally weights in a film
    that only covers part of the aperture (the thin Au on the RF rails).
    """
    t = stack_transmission(s)
    if extra_layer is not None and extra_area_fraction > 0:
        t = t * ((1 - extra_area_fraction) + extra_area_fraction * extra_layer.transmission)
    return solid_angle_fraction(g) * t


def power_at_detector(source_power: float, efficiency: float) -> float:
    return source_power * efficiency


def effective_sheet_resistance(s: FilmStack) -> float:
    """Sheet resistance (ohm/sq) of all layers conducting in parallel."""
    conductance = 0.0
    for layer in s.layers:
        if layer.resistivity is None:
            raise ValueError(f"layer {layer.label!r} has no resistivity")
        conductance += layer.thickness / layer.resistivity
    if not s.layers:
        raise ValueError("stack has no layers")
    return 1.0 / conductance


def effective_resistivity(s: FilmStack, reference_thickness: float) -> float:
    """Sheet resistance referred back to a bulk resistivity at a chosen thickness.

    Which thickness to refer to is a convention: the gold layer's thickness
    reproduces the few 1e-8 ohm m figures quoted for Au-on-ITO rails, the
    total thickness gives a much smaller number.
    """
    if not reference_thickness > 0:
        raise ValueError("reference_thickness must be positive")
    return effective_sheet_resistance(s) * reference_thickness


# ---------------------------------------------------------------- detectors


@dataclass(frozen=True)
class DetectorSpec:
    """Either a responsivity-vs-temperature table or a fixed quantum efficiency."""

    kind: str = "photodiode"
    responsivity_table: tuple = ()  # ((T_K, A_per_W), ...)
    quantum_efficiency: Optional[float] = None
    dark_current: float = 0.0  # A
    dark_count_rate: float = 0.0  # 1/s
    internal_gain: float = 1.0

    def __post_init__(self):
        if self.kind not in ("photodiode", "PMT", "VLPC"):
            raise ValueError(f"unknown detector kind {self.kind!r}")
        table = tuple(sorted((float(t), float(r)) for t, r in self.responsivity_table))
        object.__setattr__(self, "responsivity_table", table)
        if not table and self.quantum_efficiency is None:
            raise ValueError("detector needs a responsivity table or a quantum efficiency")
        if any(r < 0 for _, r in table) or any(t < 0 for t, _ in table):
            raise ValueError("responsivity table entries must be non-negative")
        if self.quantum_efficiency is not None and not 0 <= self.quantum_efficiency <= 1:
            raise ValueError("quantum_efficiency must lie in [0, 1]")
        if not self.internal_gain > 0:
            raise ValueError("internal_gain must be positive")


def detector_responsivity_at(d: DetectorSpec, temperature: float, wavelength: float = WAVELENGTH_422) -> float:
    """Responsivity (A/W, before internal gain) at a temperature.

    Log-log interpolation between table points, constant outside the table.
    """
    if temperature < 0:
        raise ValueError("temperature must be non-negative (K)")
    if not d.responsivity_table:
        return qe_to_responsivity(d.quantum_efficiency, wavelength)
    ts = np.array([t for t, _ in d.responsivity_table])
    rs = np.array([r for _, r in d.responsivity_table])
    if temperature <= ts[0]:
        return float(rs[0])
    if temperature >= ts[-1]:
        return float(rs[-1])
    k = int(np.searchsorted(ts, temperature))
    if ts[k] == temperature:
        return float(rs[k])
    if rs[k - 1] == 0 or rs[k] == 0:
        return float(np.interp(temperature, ts, rs))
    w = (np.log(temperature) - np.log(ts[k - 1])) / (np.log(ts[k]) - np.log(ts[k - 1]))
    return float(np.exp((1 - w) * np.log(rs[k - 1]) + w * np.log(rs[k])))


def detector_qe(d: DetectorSpec, temperature: float, wavelength: float = WAVELENGTH_422) -> float:
    if d.quantum_efficiency is not None and not d.responsivity_table:
        return d.quantum_efficiency
    return responsivity_to_qe(detector_responsivity_at(d, temperature, wavelength), wavelength)


def photocurrent(d: DetectorSpec, power: float, temperature: float, wavelength: float = WAVELENGTH_422) -> float:
    if power < 0:
        raise ValueError("optical power must be non-negative")
    return power * detector_responsivity_at(d, temperature, wavelength) * d.internal_gain


# ---------------------------------------------------------------- amplifier / lock-in


@dataclass(frozen=True)
class AmplifierChain:
    """Transimpedance preamp followed by a lock-in.

    Lock-in convention: output = ``lockin_gain`` x mean(v_preamp(t) x r(t)),
    with r(t) a +-1 square wave at the reference frequency, in phase with the
    modulation. Only the product transimpedance_gain * lockin_gain is fixed by
    calibration; the split between the two is arbitrary.
    """

    transimpedance_gain: float = 1e9  # V/A
    amp_input_noise_current: float = 1e-15  # A/sqrt(Hz)
    feedback_resistance: float = 1e9  # ohm; inf disables Johnson noise
    lockin_reference_frequency: float = 300.0  # Hz
    lockin_time_constant: float = 0.03  # s
    lockin_gain: float = 40.0
    amplifier_temperature: float = 77.0  # K

    def __post_init__(self):
        if not (self.transimpedance_gain > 0 and self.lockin_gain > 0):
            raise ValueError("gains must be positive")
        if not self.lockin_time_constant > 0:
            raise ValueError("lockin_time_constant must be positive")
        if not self.feedback_resistance > 0:
            raise ValueError("feedback_resistance must be positive")
        if self.amp_input_noise_current < 0:
            raise ValueError("amp_input_noise_current must be non-negative")
        if not self.lockin_reference_frequency > 0:
            raise ValueError("lockin_reference_frequency must be positive")


@dataclass(frozen=True)
class NoiseBudget:
    shot_rms: float
    johnson_rms: float
    amp_rms: float
    total_rms: float

    def as_dict(self):
        return {"shot_rms_A": self.shot_rms, "johnson_rms_A": self.johnson_rms,
                "amp_rms_A": self.amp_rms, "total_rms_A": self.total_rms}


def noise_budget(a: AmplifierChain, dc_current: float, bandwidth: float, temperature: float) -> NoiseBudget:
    """Input-referred RMS current noise in a bandwidth (Hz)."""
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    shot = np.sqrt(2 * E_CHARGE * abs(dc_current) * bandwidth)
    johnson = 0.0 if np.isinf(a.feedback_resistance) else np.sqrt(4 * K_B * temperature * bandwidth / a.feedback_resistance)
    amp = a.amp_input_noise_current * np.sqrt(bandwidth)
    total = np.sqrt(shot ** 2 + johnson ** 2 + amp ** 2)
    return NoiseBudget(float(shot), float(johnson), float(amp), float(total))


def reference_overlap(mod: ModulationSpec) -> float:
    """mean(g(t) r(t)) for the modulation gate g and the +-1 square reference."""
    return mod.depth * min(mod.duty, 1.0 - mod.duty)


def end_to_end_gain(a: AmplifierChain, mod: ModulationSpec) -> float:
    """Lock-in volts per ampere of on-state (peak) photocurrent."""
    return a.transimpedance_gain * a.lockin_gain * reference_overlap(mod)


def lockin_output_analytic(a: AmplifierChain, signal_peak_current: float, mod: ModulationSpec) -> float:
    return end_to_end_gain(a, mod) * signal_peak_current


@dataclass(frozen=True)
class LockinNoise:
    """Which noise sources a simulation injects.

    The repumper-scatter background is a flux that follows the same gate as
    the ions, with a slowly fluctuating amplitude (Ornstein-Uhlenbeck,
    relative std ``background_rel_fluctuation``, correlation time
    ``background_corr_time``).
    """

    shot: bool = True
    dark: bool = True
    amplifier: bool = True
    background_flux: float = 0.0  # photons/s at the detector, on-state
    background_rel_fluctuation: float = 0.0
    background_corr_time: float = 0.03  # s


NOISELESS = LockinNoise(shot=False, dark=False, amplifier=False)


@dataclass
class LockinResult:
    time: np.ndarray
    v_out: np.ndarray
    mean: float
    std: float
    settle_time: float
    extra: dict = field(default_factory=dict)


def _ou_process(rng, n, dt, tau):
    """Unit-variance Ornstein-Uhlenbeck samples (exact AR(1) update)."""
    rho = np.exp(-dt / tau)
    x = rng.standard_normal(n) * np.sqrt(1 - rho ** 2)
    x[0] = rng.standard_normal()
    return signal.lfilter([1.0], [1.0, -rho], x)


def lockin_simulate(a: AmplifierChain, flux_waveform, detector: DetectorSpec, temperature: float,
                    duration: float, sample_rate: float, seed: int,
                    noise: LockinNoise = LockinNoise(), modulation: Optional[ModulationSpec] = None,
                    wavelength: float = WAVELENGTH_422, output_decimation: int = 1) -> LockinResult:
    """Sampled Monte Carlo of photodetection, preamp and lock-in.

    :param flux_waveform: photons/s incident on the detector, either a
        callable of time or an array of length ``duration * sample_rate``
    :param modulation: gate for the background scatter; defaults to a 50%
        square wave at the reference frequency
    :returns: output time series after the single-pole low-pass, plus mean
        and std after discarding the first 10 time constants
    """
    f_mod = a.lockin_reference_frequency
    if sample_rate < 10 * f_mod:
        raise ConfigurationError(f"sample_rate {sample_rate} Hz is below 10x the modulation frequency {f_mod} Hz")
    if duration < 10 * a.lockin_time_constant:
        raise ConfigurationError(f"duration {duration} s is shorter than 10 lock-in time constants")
    n = int(round(duration * sample_rate))
    dt = 1.0 / sample_rate
    t = np.arange(n) * dt
    mod = modulation or ModulationSpec(frequency=f_mod)
    rng = np.random.default_rng(seed)

    if callable(flux_waveform):
        flux = np.asarray(flux_waveform(t), dtype=float)
    else:
        flux = np.asarray(flux_waveform, dtype=float)
        if flux.shape != (n,):
            raise ConfigurationError(f"flux array has shape {flux.shape}, expected ({n},)")
    flux = np.broadcast_to(flux, (n,)).astype(float)

    if noise.background_flux > 0:
        amp = 1.0
        if noise.background_rel_fluctuation > 0:
            amp = 1.0 + noise.background_rel_fluctuation * _ou_process(rng, n, dt, noise.background_corr_time)
            amp = np.clip(amp, 0.0, None)
        flux = flux + noise.background_flux * amp * mod.gate(t)

    qe = detector_qe(detector, temperature, wavelength)
    gain = detector.internal_gain
    expected_e = flux * qe * dt
    electrons = rng.poisson(expected_e).astype(float) if noise.shot else expected_e
    current = electrons * E_CHARGE / dt * gain
    if noise.dark and detector.dark_current > 0:
        current = current + rng.poisson(detector.dark_current * dt / E_CHARGE, size=n) * E_CHARGE / dt
    if noise.amplifier:
        nyquist = 0.5 * sample_rate
        budget = noise_budget(a, 0.0, nyquist, a.amplifier_temperature)
        sigma = np.hypot(budget.johnson_rms, budget.amp_rms)
        current = current + rng.standard_normal(n) * sigma

    reference = np.where(np.mod(t * f_mod, 1.0) < 0.5, 1.0, -1.0)
    mixed = current * a.transimpedance_gain * reference
    alpha = -np.expm1(-dt / a.lockin_time_constant)
    v_out = a.lockin_gain * signal.lfilter([alpha], [1.0, alpha - 1.0], mixed)

    settle = 10 * a.lockin_time_constant
    k0 = int(np.ceil(settle * sample_rate))
    tail = v_out[k0:]
    step = max(1, int(output_decimation))
    return LockinResult(time=t[::step], v_out=v_out[::step], mean=float(np.mean(tail)),
                        std=float(np.std(tail)), settle_time=settle)


# ---------------------------------------------------------------- scenarios


@dataclass(frozen=True)
class DetectionScenario:
    """Source, optics, detector and readout chain: one row of the signal table.

    ``source_power`` overrides the power computed from the scatter rate; the
    headline table quotes a rounded total (200 pW) rather than the product.
    """

    name: str
    source: IonSource
    detector: DetectorSpec
    geometry: CollectionGeometry
    stack: FilmStack = FilmStack()
    modulation: ModulationSpec = ModulationSpec()
    amplifier: Optional[AmplifierChain] = None
    temperature: float = 77.0
    source_power: Optional[float] = None
    lockin_noise: LockinNoise = LockinNoise()
    simulation: dict = field(default_factory=dict, hash=False, compare=True)


def budget(sc: DetectionScenario) -> dict:
    """Signal budget for one scenario, SI units."""
    emitted = total_emitted_power(sc.source)
    p_src = sc.source_power if sc.source_power is not None else emitted
    omega = solid_angle_fraction(sc.geometry)
    stack_t = stack_transmission(sc.stack)
    eff = omega * stack_t
    p_det = power_at_detector(p_src, eff)
    qe = detector_qe(sc.detector, sc.temperature, sc.source.wavelength)
    row = {
        "scenario": sc.name,
        "total_emitted_power_W": emitted,
        "source_power_W": p_src,
        "solid_angle_fraction": omega,
        "stack_transmission": stack_t,
        "light_collection_efficiency": eff,
        "power_at_detector_W": p_det,
        "detector_qe": qe,
        "detected_photon_rate_per_s": p_det / photon_energy(sc.source.wavelength) * qe,
        "photocurrent_A": None,
        "lockin_output_V": None,
    }
    if sc.detector.kind != "PMT":
        i_sig = photocurrent(sc.detector, p_det, sc.temperature, sc.source.wavelength)
        row["photocurrent_A"] = i_sig
        if sc.amplifier is not None:
            row["lockin_output_V"] = lockin_output_analytic(sc.amplifier, i_sig, sc.modulation)
    return row


def detected_flux(sc: DetectionScenario, n_ions: Optional[int] = None) -> float:
    """On-state photon flux (photons/s) arriving at the detector.

    With ``n_ions`` given, the scenario's source power is rescaled per ion.
    """
    p_src = sc.source_power if sc.source_power is not None else total_emitted_power(sc.source)
    if n_ions is not None:
        if n_ions < 0:
            raise ValueError("n_ions must be non-negative")
        p_src = p_src * n_ions / sc.source.n_ions
    eff = solid_angle_fraction(sc.geometry) * stack_transmission(sc.stack)
    return p_src * eff / photon_energy(sc.source.wavelength)


def simulate_scenario(sc: DetectionScenario, seed: int, with_ions: bool = True,
                      n_ions: Optional[int] = None, noise: Optional[LockinNoise] = None,
                      duration: Optional[float] = None, sample_rate: Optional[float] = None,
                      output_decimation: Optional[int] = None) -> LockinResult:
    """Lock-in run for a scenario, with or without the ion fluorescence."""
    if sc.amplifier is None:
        raise ConfigurationError(f"scenario {sc.name!r} has no amplifier chain")
    sim = sc.simulation
    duration = duration or sim.get("duration_s", 300.0)
    sample_rate = sample_rate or sim.get("sample_rate_Hz", 6000.0)
    output_decimation = output_decimation or sim.get("output_decimation", 60)
    flux_on = detected_flux(sc, n_ions) if with_ions else 0.0
    mod = sc.modulation

    def waveform(t):
        return flux_on * mod.envelope(t)

    return lockin_simulate(sc.amplifier, waveform, sc.detector, sc.temperature, duration, sample_rate,
                           seed, noise or sc.lockin_noise, modulation=mod,
                           wavelength=sc.source.wavelength, output_decimation=output_decimation)


def background_subtracted_mean(sc: DetectionScenario, seed: int, n_ions: Optional[int] = None, **kw):
    """Mean lock-in signal with ions minus the mean without (independent runs)."""
    with_ions = simulate_scenario(sc, seed, True, n_ions, **kw)
    without = simulate_scenario(sc, seed + 1, False, n_ions, **kw)
    return with_ions.mean - without.mean, with_ions, without


def pooled_std(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    na, nb = len(a), len(b)
    return float(np.sqrt(((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / (na + nb - 2)))


def histogram(samples, bin_width: float):
    """Left-closed bins on a grid of multiples of ``bin_width``.

    :returns: (bin_centres, counts)
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two samples")
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    idx = np.floor(x / bin_width).astype(np.int64)
    lo = idx.min()
    counts = np.bincount(idx - lo)
    centres = (np.arange(len(counts)) + lo + 0.5) * bin_width
    return centres, counts


def fit_background_fluctuation(sc: DetectionScenario, target_std: float, seed: int,
                               iterations: int = 6) -> float:
    """Relative background fluctuation giving a lock-in output std of ``target_std``.

    Secant iteration on the no-ion run; the std is nearly linear in the
    fluctuation amplitude until clipping sets in.
    """
    base = sc.lockin_noise
    x = base.background_rel_fluctuation or 0.1
    for _ in range(iterations):
        noise = LockinNoise(base.shot, base.dark, base.amplifier, base.background_flux, x,
                            base.background_corr_time)
        std = simulate_scenario(sc, seed, with_ions=False, noise=noise).std
        if std <= 0:
            raise ConfigurationError("background fluctuation produces no output noise")
        x_new = x * target_std / std
        if abs(x_new - x) < 1e-4 * x:
            return x_new
        x = x_new
    return x
