"""Bright/dark discrimination from Poisson photon counts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

DEFAULT_DARK_RATE = 1e3  # detected background counts/s


class NotDiscriminableError(ValueError):
    pass


class InfeasibleTargetError(RuntimeError):
    def __init__(self, message, supremum_fidelity):
        super().__init__(message)
        self.supremum_fidelity = supremum_fidelity


@dataclass(frozen=True)
class CountModel:
    bright_rate: float  # detected counts/s in the bright state
    dark_rate: float = DEFAULT_DARK_RATE
    integration_time: float = 1e-3

    def __post_init__(self):
        if self.bright_rate < 0 or self.dark_rate < 0:
            raise ValueError("count rates must be non-negative")
        if self.integration_time < 0:
            raise ValueError("integration_time must be non-negative")

    @classmethod
    def from_efficiency(cls, scatter_rate, total_efficiency, dark_rate=DEFAULT_DARK_RATE, integration_time=1e-3):
        return cls(scatter_rate * total_efficiency, dark_rate, integration_time)

    @property
    def bright_mean(self) -> float:
        return self.bright_rate * self.integration_time

    @property
    def dark_mean(self) -> float:
        return self.dark_rate * self.integration_time


@dataclass(frozen=True)
class DiscriminationResult:
    threshold: int  # read "bright" when counts >= threshold
    fidelity: float
    p_miss: float
    p_false: float


def poisson_cdf(k, mean):
    """P(N <= k) for N ~ Poisson(mean); k may be an array, negative k gives 0."""
    k = np.asarray(k)
    if mean == 0:
        return np.where(k >= 0, 1.0, 0.0)
    return np.where(k >= 0, special.pdtr(np.maximum(k, 0), mean), 0.0)


def poisson_sf(k, mean):
    """P(N > k)."""
    k = np.asarray(k)
    if mean == 0:
        return np.where(k >= 0, 0.0, 1.0)
    return np.where(k >= 0, special.pdtrc(np.maximum(k, 0), mean), 1.0)


def _error_curve(bright_mean, dark_mean):
    n_max = int(np.ceil(bright_mean + 10 * np.sqrt(bright_mean))) + 1
    n = np.arange(0, n_max + 1)
    p_miss = poisson_cdf(n - 1, bright_mean)
    p_false = poisson_sf(n - 1, dark_mean)
    return n, p_miss, p_false


def optimal_threshold(m: CountModel) -> DiscriminationResult:
    """Integer threshold minimising the mean of the two error probabilities.

    Exhaustive scan over n in [0, mean_b + 10 sqrt(mean_b)]; ties go to the
    smaller threshold.
    """
    mb, md = m.bright_mean, m.dark_mean
    if not mb > md:
        if mb == md == 0:
            return DiscriminationResult(0, 0.5, 0.0, 1.0)
        raise NotDiscriminableError(f"bright mean {mb} does not exceed dark mean {md}")
    n, p_miss, p_false = _error_curve(mb, md)
    err = 0.5 * (p_miss + p_false)
    k = int(np.argmin(err))  # first minimum
    return DiscriminationResult(int(n[k]), float(1.0 - err[k]), float(p_miss[k]), float(p_false[k]))


def fidelity_at_time(bright_rate: float, dark_rate: float, t: float) -> float:
    if t < 0:
        raise ValueError("integration time must be non-negative")
    if t == 0:
        if not bright_rate > dark_rate:
            raise NotDiscriminableError("bright rate must exceed dark rate")
        return 0.5
    return optimal_threshold(CountModel(bright_rate, dark_rate, t)).fidelity


def min_integration_time(bright_rate: float, dark_rate: float, target_fidelity: float,
                         rel_tol: float = 0.01, t_max: float = 1e3) -> float:
    """Shortest window reaching ``target_fidelity``, by bisection on a log scale.

    Returns the upper end of the final bracket, so the fidelity there is at
    least the target and the bracket is narrower than ``rel_tol``.
    """
    if not 0.5 < target_fidelity < 1:
        raise ValueError("target fidelity must lie in (0.5, 1)")
    if not bright_rate > dark_rate:
        raise NotDiscriminableError("bright rate must exceed dark rate")

    # initial bracket: a window with well under one expected bright count
    lo = 1e-3 / bright_rate
    while fidelity_at_time(bright_rate, dark_rate, lo) >= target_fidelity:
        lo /= 10
        if lo < 1e-30:
            return lo
    hi = lo
    while fidelity_at_time(bright_rate, dark_rate, hi) < target_fidelity:
        lo = hi
        hi *= 2
        if hi > t_max:
            sup = fidelity_at_time(bright_rate, dark_rate, t_max)
            raise InfeasibleTargetError(
                f"fidelity {target_fidelity} not reached within {t_max} s", sup)
    while hi / lo > 1 + rel_tol:
        mid = np.sqrt(lo * hi)
        if fidelity_at_time(bright_rate, dark_rate, mid) >= target_fidelity:
            hi = mid
        else:
            lo = mid
    return float(hi)


def analog_fidelity(signal_current: float, noise_rms: float) -> float:
    """Two-level Gaussian discrimination with a midpoint threshold.

    Dark state at zero current, bright state at ``signal_current``, both with
    the same RMS noise in the detection bandwidth.
    """
    if noise_rms < 0:
        raise ValueError("noise must be non-negative")
    if noise_rms == 0:
        return 1.0 if signal_current > 0 else 0.5
    return float(1.0 - 0.5 * special.erfc(signal_current / (2 * noise_rms) / np.sqrt(2)))
