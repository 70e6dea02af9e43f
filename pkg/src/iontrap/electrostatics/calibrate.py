"""Fit five-wire parameters to a target ion height, frequency band and depth."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize

from .fivewire import FiveWireTemplate
from .solver import TrapError, TrapSolution, find_minimum, solve


@dataclass(frozen=True)
class CalibrationTargets:
    ion_height: float = 100e-6
    height_tolerance: float = 0.02  # relative
    frequency_band: tuple = (0.8e6, 1.3e6)  # Hz, every secular frequency
    depth: float = 0.300  # eV
    depth_tolerance: float = 0.20  # relative
    # Ion-to-RF-null distance allowed, relative to ion_height. None disables
    # the check (lets static fields drag the ion off the null).
    max_null_offset: float | None = 0.02

    @property
    def depth_band(self):
        return (self.depth * (1 - self.depth_tolerance), self.depth * (1 + self.depth_tolerance))


@dataclass(frozen=True)
class CalibrationReport:
    success: bool
    template: FiveWireTemplate
    solution: TrapSolution | None
    residuals: dict
    violations: tuple
    iterations: int
    analytic_seed_height: float
    rf_null_height: float | None
    message: str = ""
    history: tuple = field(default=(), repr=False)

    def as_dict(self):
        t = asdict(self.template)
        return {
            "success": self.success,
            "message": self.message,
            "violations": list(self.violations),
            "residuals": self.residuals,
            "iterations": self.iterations,
            "analytic_seed_height_m": self.analytic_seed_height,
            "rf_null_height_m": self.rf_null_height,
            "template": t,
            "solution": self.solution.as_dict() if self.solution else None,
        }


class CalibrationError(TrapError):
    def __init__(self, message, report: CalibrationReport):
        super().__init__(message, report=report.as_dict())
        self.report = report


# Normalised so that |r| <= 1 on every entry means the targets are met,
# with a 10% margin inside the frequency band and depth window.
def _residuals(template: FiveWireTemplate, targets: CalibrationTargets):
    layout = template.layout()
    seed = (0.0, 0.0, template.analytic_height())
    sol = solve(layout, seed)
    h = sol.minimum_position[2]
    lo, hi = targets.frequency_band
    margin = 0.1 * (hi - lo)
    f = np.asarray(sol.secular_frequencies)
    outside = f - np.clip(f, lo + margin, hi - margin)
    d_lo, d_hi = targets.depth_band
    r = {
        "height": (h - targets.ion_height) / (targets.height_tolerance * targets.ion_height),
        "frequencies": (outside / margin).tolist(),
        "depth": (sol.trap_depth - targets.depth) / (0.5 * (d_hi - d_lo)),
        "escape_saddle": 0.0 if sol.escape_is_saddle else 1.0,
    }
    null_h = None
    if targets.max_null_offset is not None:
        null = find_minimum(layout.with_dc_scaled(0.0), seed)
        null_h = float(null[2])
        r["rf_null_offset"] = (null_h - h) / (targets.max_null_offset * targets.ion_height)
    return sol, r, null_h


def _flatten(r: dict):
    out = []
    for k in ("height", "frequencies", "depth", "escape_saddle", "rf_null_offset"):
        if k in r:
            v = r[k]
            out.extend(v if isinstance(v, list) else [v])
    return np.array(out, dtype=float)


def check_targets(sol: TrapSolution, targets: CalibrationTargets, rf_null_height=None):
    """Hard acceptance of a solution: list of violated targets (empty when met)."""
    bad = []
    h = sol.minimum_position[2]
    if abs(h - targets.ion_height) > targets.height_tolerance * targets.ion_height:
        bad.append(f"height {h * 1e6:.2f} um outside {targets.ion_height * 1e6:.1f} um +- "
                   f"{100 * targets.height_tolerance:.0f}%")
    lo, hi = targets.frequency_band
    for f in sol.secular_frequencies:
        if not lo <= f <= hi:
            bad.append(f"secular frequency {f / 1e6:.3f} MHz outside [{lo / 1e6}, {hi / 1e6}] MHz")
    d_lo, d_hi = targets.depth_band
    if not d_lo <= sol.trap_depth <= d_hi:
        bad.append(f"depth {sol.trap_depth * 1e3:.1f} meV outside [{d_lo * 1e3:.0f}, {d_hi * 1e3:.0f}] meV")
    if not sol.escape_is_saddle:
        bad.append("escape point is not a first-order saddle")
    if targets.max_null_offset is not None and rf_null_height is not None:
        if abs(rf_null_height - h) > targets.max_null_offset * targets.ion_height:
            bad.append(f"ion sits {abs(rf_null_height - h) * 1e6:.2f} um from the RF null")
    return tuple(bad)


DEFAULT_BOUNDS = {
    "center_width": (40e-6, 400e-6),
    "rf_width": (20e-6, 400e-6),
    "rf_amplitude": (10.0, 600.0),
    "endcap_voltage": (-30.0, 40.0),
    "middle_dc_voltage": (-30.0, 30.0),
    "center_voltage": (-30.0, 30.0),
    "middle_dc_length": (40e-6, 600e-6),
    "endcap_length": (50e-6, 2000e-6),
    "dc_width": (30e-6, 3000e-6),
}


def calibrate(template: FiveWireTemplate, targets: CalibrationTargets = CalibrationTargets(),
              free=FiveWireTemplate.FREE_PARAMETERS, bounds=None, max_nfev: int = 200,
              raise_on_failure: bool = True) -> CalibrationReport:
    """Least-squares fit of the free template parameters.

    :raises CalibrationError: targets not met within the parameter bounds;
        the attached report holds the best iterate and its residuals
    """
    free = tuple(free)
    bounds = {**DEFAULT_BOUNDS, **(bounds or {})}
    x0 = np.array([getattr(template, k) for k in free], dtype=float)
    scale = np.where(np.abs(x0) > 0, np.abs(x0), 1.0)
    lo = np.array([bounds[k][0] for k in free]) / scale
    hi = np.array([bounds[k][1] for k in free]) / scale
    u0 = np.clip(x0 / scale, lo, hi)
    best = {"cost": np.inf}
    history = []
    n_fail = [0]

    def build(u):
        return template.with_params(**{k: float(v) for k, v in zip(free, u * scale)})

    def fun(u):
        t = build(u)
        try:
            sol, r, null_h = _residuals(t, targets)
        except (TrapError, ValueError, np.linalg.LinAlgError):
            n_fail[0] += 1
            return np.full(len(_flatten_len(targets)), 10.0)
        vec = _flatten(r)
        cost = float(vec @ vec)
        history.append(cost)
        if cost < best["cost"]:
            best.update(cost=cost, template=t, sol=sol, r=r, null_h=null_h)
        return vec

    res = optimize.least_squares(fun, u0, bounds=(lo, hi), diff_step=1e-3, x_scale="jac",
                                 max_nfev=max_nfev)
    if "template" not in best:
        report = CalibrationReport(False, template, None, {}, ("no evaluable layout",), int(res.nfev),
                                   template.analytic_height(), None, "every trial layout failed to solve",
                                   tuple(history))
        if raise_on_failure:
            raise CalibrationError(report.message, report)
        return report

    violations = check_targets(best["sol"], targets, best["null_h"])
    report = CalibrationReport(
        success=not violations,
        template=best["template"],
        solution=best["sol"],
        residuals=best["r"],
        violations=violations,
        iterations=int(res.nfev),
        analytic_seed_height=template.analytic_height(),
        rf_null_height=best["null_h"],
        message="targets met" if not violations else "targets not met: " + "; ".join(violations),
        history=tuple(history),
    )
    if violations and raise_on_failure:
        raise CalibrationError(report.message, report)
    return report


def _flatten_len(targets: CalibrationTargets):
    n = 1 + 3 + 1 + 1 + (1 if targets.max_null_offset is not None else 0)
    return range(n)
