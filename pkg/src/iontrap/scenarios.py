"""JSON scenario documents: parsing with field paths, serialisation, presets.

Every document carries a ``schema`` tag:

* ``trap-layout/1``         electrode list (m, V), RF drive, optional
                            five-wire template and calibration targets
* ``detection-scenario/1``  source, optics, detector, amplifier, lock-in noise
* ``entanglement-link/1``   two emitter nodes, attempt rate, protocol
* ``fidelity-query/1``      count rates (or an efficiency) and a fidelity target

Any of them may carry a ``sweep`` block: ``{"parameter": "a.b.c", "start":
x0, "stop": x1, "steps": n}`` or ``{"parameter": ..., "values": [...]}``.
"""

from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import asdict, fields
from importlib import resources
from pathlib import Path

from .detection import (
    AmplifierChain,
    CollectionGeometry,
    DetectionScenario,
    DetectorSpec,
    FilmLayer,
    FilmStack,
    LockinNoise,
)
from .electrostatics.calibrate import CalibrationTargets
from .electrostatics.fivewire import FiveWireTemplate
from .electrostatics.layout import RectElectrode, Role, TrapLayout
from .entanglement import EmitterNode, EntanglementLink
from .fluorescence import IonSource, ModulationSpec

TRAP = "trap-layout/1"
DETECTION = "detection-scenario/1"
LINK = "entanglement-link/1"
FIDELITY = "fidelity-query/1"
SCHEMAS = (TRAP, DETECTION, LINK, FIDELITY)

PRESET_ENV = "IONTRAP_PRESET_DIR"


class SchemaError(ValueError):
    """Invalid scenario document; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


def _join(path, key):
    if isinstance(key, int):
        return f"{path}[{key}]"
    return f"{path}.{key}" if path else key


def _get(doc, key, path, kind=float, required=True, default=None):
    if not isinstance(doc, dict):
        raise SchemaError(path or "<root>", "expected an object")
    p = _join(path, key)
    if key not in doc or doc[key] is None:
        if required:
            raise SchemaError(p, "missing required field")
        return default
    v = doc[key]
    if kind is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SchemaError(p, f"expected a number, got {type(v).__name__}")
        return float(v)
    if kind is int:
        if isinstance(v, bool) or not isinstance(v, int):
            if isinstance(v, float) and v.is_integer():
                return int(v)
            raise SchemaError(p, f"expected an integer, got {v!r}")
        return v
    if kind is str:
        if not isinstance(v, str):
            raise SchemaError(p, f"expected a string, got {type(v).__name__}")
        return v
    if kind is bool:
        if not isinstance(v, bool):
            raise SchemaError(p, f"expected true/false, got {v!r}")
        return v
    if kind is dict:
        if not isinstance(v, dict):
            raise SchemaError(p, "expected an object")
        return v
    if kind is list:
        if not isinstance(v, list):
            raise SchemaError(p, "expected an array")
        return v
    raise TypeError(kind)


def _build(path, ctor, **kw):
    try:
        return ctor(**kw)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(path or "<root>", str(exc)) from None


def _check_keys(doc, allowed, path):
    extra = set(doc) - set(allowed)
    if extra:
        k = sorted(extra)[0]
        raise SchemaError(_join(path, k), "unknown field")


# ------------------------------------------------------------------ trap layout

_ION_KEYS = ("mass", "charge", "species")


def parse_electrode(d, path):
    _check_keys(d, ("name", "role", "x_min", "x_max", "y_min", "y_max", "voltage"), path)
    role = _get(d, "role", path, str)
    if role not in {r.value for r in Role}:
        raise SchemaError(_join(path, "role"), f"unknown role {role!r}")
    return _build(path, RectElectrode,
                  x_min=_get(d, "x_min", path), x_max=_get(d, "x_max", path),
                  y_min=_get(d, "y_min", path), y_max=_get(d, "y_max", path),
                  role=Role(role), voltage=_get(d, "voltage", path, required=False, default=0.0),
                  name=_get(d, "name", path, str, required=False, default=""))


def parse_template(d, path):
    allowed = [f.name for f in fields(FiveWireTemplate)]
    _check_keys(d, allowed + ["kind"], path)
    kind = _get(d, "kind", path, str, required=False, default="five-wire")
    if kind != "five-wire":
        raise SchemaError(_join(path, "kind"), f"unknown template kind {kind!r}")
    kw = {k: _get(d, k, path) for k in allowed if k in d}
    return _build(path, FiveWireTemplate, **kw)


def parse_targets(d, path):
    _check_keys(d, [f.name for f in fields(CalibrationTargets)], path)
    kw = {}
    for k in ("ion_height", "height_tolerance", "depth", "depth_tolerance"):
        if k in d:
            kw[k] = _get(d, k, path)
    if "max_null_offset" in d:
        kw["max_null_offset"] = _get(d, "max_null_offset", path, required=False)
    if "frequency_band" in d:
        band = _get(d, "frequency_band", path, list)
        if len(band) != 2 or not all(isinstance(v, (int, float)) for v in band) or not band[0] < band[1]:
            raise SchemaError(_join(path, "frequency_band"), "expected [low, high] with low < high")
        kw["frequency_band"] = (float(band[0]), float(band[1]))
    return _build(path, CalibrationTargets, **kw)


def parse_trap(doc):
    _check_keys(doc, ("schema", "name", "description", "rf_amplitude", "rf_frequency", "ion", "electrodes",
                      "template", "targets", "initial_guess", "film_stack", "sweep", "seed"), "")
    template = parse_template(doc["template"], "template") if "template" in doc else None
    targets = parse_targets(doc["targets"], "targets") if "targets" in doc else CalibrationTargets()
    electrodes = doc.get("electrodes")
    layout = None
    if electrodes is not None:
        els = _get(doc, "electrodes", "", list)
        if not els:
            raise SchemaError("electrodes", "empty electrode list")
        es = tuple(parse_electrode(e, f"electrodes[{i}]") for i, e in enumerate(els))
        ion = _get(doc, "ion", "", dict, required=False, default={})
        _check_keys(ion, _ION_KEYS, "ion")
        kw = {}
        if "mass" in ion:
            kw["ion_mass"] = _get(ion, "mass", "ion")
        if "charge" in ion:
            kw["ion_charge"] = _get(ion, "charge", "ion")
        layout = _build("electrodes", TrapLayout, electrodes=es, rf_amplitude=_get(doc, "rf_amplitude", ""),
                        rf_angular_frequency=2 * math.pi * _get(doc, "rf_frequency", ""), **kw)
    elif template is None:
        raise SchemaError("electrodes", "need an electrode list or a template")
    guess = doc.get("initial_guess")
    if guess is not None:
        g = _get(doc, "initial_guess", "", list)
        if len(g) != 3 or not all(isinstance(v, (int, float)) for v in g):
            raise SchemaError("initial_guess", "expected [x, y, z] in metres")
        if g[2] <= 0:
            raise SchemaError("initial_guess", "z must be positive")
        guess = tuple(float(v) for v in g)
    stack = parse_stack(doc["film_stack"], "film_stack") if "film_stack" in doc else None
    return {"layout": layout, "template": template, "targets": targets, "initial_guess": guess,
            "film_stack": stack}


def layout_to_doc(layout: TrapLayout, name: str = "", **extra):
    doc = {
        "schema": TRAP,
        "name": name,
        "rf_amplitude": layout.rf_amplitude,
        "rf_frequency": layout.rf_angular_frequency / (2 * math.pi),
        "ion": {"mass": layout.ion_mass, "charge": layout.ion_charge},
        "electrodes": [
            {"name": e.name, "role": e.role.value, "x_min": e.x_min, "x_max": e.x_max,
             "y_min": e.y_min, "y_max": e.y_max, "voltage": e.voltage}
            for e in layout.electrodes
        ],
    }
    doc.update(extra)
    return doc


def template_to_doc(t: FiveWireTemplate):
    return {"kind": "five-wire", **asdict(t)}


def targets_to_doc(t: CalibrationTargets):
    d = asdict(t)
    d["frequency_band"] = list(t.frequency_band)
    return d


# ------------------------------------------------------------------ detection


def parse_stack(d, path):
    _check_keys(d, ("layers", "substrate_transmission"), path)
    layers = []
    for i, layer in enumerate(_get(d, "layers", path, list, required=False, default=[])):
        lp = _join(_join(path, "layers"), i)
        _check_keys(layer, ("label", "thickness", "transmission", "resistivity"), lp)
        layers.append(_build(lp, FilmLayer, label=_get(layer, "label", lp, str),
                             thickness=_get(layer, "thickness", lp),
                             transmission=_get(layer, "transmission", lp),
                             resistivity=_get(layer, "resistivity", lp, required=False)))
    return _build(path, FilmStack, layers=tuple(layers),
                  substrate_transmission=_get(d, "substrate_transmission", path, required=False, default=1.0))


def stack_to_doc(s: FilmStack):
    return {"layers": [asdict(layer) for layer in s.layers], "substrate_transmission": s.substrate_transmission}


def _simple(d, path, cls, int_fields=(), str_fields=(), bool_fields=()):
    names = [f.name for f in fields(cls)]
    _check_keys(d, names, path)
    kw = {}
    for k in names:
        if k not in d:
            continue
        kind = int if k in int_fields else str if k in str_fields else bool if k in bool_fields else float
        kw[k] = _get(d, k, path, kind, required=False)
        if kw[k] is None:
            del kw[k]
    return _build(path, cls, **kw)


def parse_detector(d, path):
    _check_keys(d, [f.name for f in fields(DetectorSpec)], path)
    kw = {"kind": _get(d, "kind", path, str)}
    if "responsivity_table" in d:
        table = _get(d, "responsivity_table", path, list)
        rows = []
        for i, row in enumerate(table):
            if not (isinstance(row, list) and len(row) == 2 and all(isinstance(v, (int, float)) for v in row)):
                raise SchemaError(_join(_join(path, "responsivity_table"), i), "expected [T_K, A_per_W]")
            rows.append((float(row[0]), float(row[1])))
        kw["responsivity_table"] = tuple(rows)
    for k in ("quantum_efficiency", "dark_current", "dark_count_rate", "internal_gain"):
        if d.get(k) is not None:
            kw[k] = _get(d, k, path)
    return _build(path, DetectorSpec, **kw)


def detector_to_doc(d: DetectorSpec):
    out = asdict(d)
    out["responsivity_table"] = [list(r) for r in d.responsivity_table]
    return out


def parse_detection(doc):
    _check_keys(doc, ("schema", "name", "description", "source", "source_power", "modulation", "geometry",
                      "stack", "detector", "amplifier", "temperature", "lockin_noise", "simulation",
                      "sweep", "seed"), "")
    src = _simple(_get(doc, "source", "", dict), "source", IonSource, int_fields=("n_ions",))
    mod = _simple(doc.get("modulation", {}), "modulation", ModulationSpec, str_fields=("shape",))
    g = _get(doc, "geometry", "", dict)
    _check_keys(g, [f.name for f in fields(CollectionGeometry)], "geometry")
    ap = _get(g, "aperture", "geometry", list)
    if len(ap) != 4 or not all(isinstance(v, (int, float)) for v in ap):
        raise SchemaError("geometry.aperture", "expected [x_min, x_max, y_min, y_max] in metres")
    geom = _build("geometry", CollectionGeometry, aperture=tuple(ap),
                  **{k: _get(g, k, "geometry") for k in ("ion_height_above_surface", "substrate_thickness",
                                                           "trap_to_detector_gap") if k in g})
    stack = parse_stack(doc["stack"], "stack") if "stack" in doc else FilmStack()
    det = parse_detector(_get(doc, "detector", "", dict), "detector")
    amp = _simple(doc["amplifier"], "amplifier", AmplifierChain) if doc.get("amplifier") is not None else None
    noise = _simple(doc.get("lockin_noise", {}), "lockin_noise", LockinNoise,
                    bool_fields=("shot", "dark", "amplifier"))
    sim = _get(doc, "simulation", "", dict, required=False, default={})
    _check_keys(sim, ("duration_s", "sample_rate_Hz", "output_decimation", "histogram_bin_V"), "simulation")
    for k, v in sim.items():
        _get(sim, k, "simulation", int if k == "output_decimation" else float)
    return _build("", DetectionScenario, name=_get(doc, "name", "", str, required=False, default=""),
                  source=src, detector=det, geometry=geom, stack=stack, modulation=mod, amplifier=amp,
                  temperature=_get(doc, "temperature", "", required=False, default=77.0),
                  source_power=_get(doc, "source_power", "", required=False),
                  lockin_noise=noise, simulation=dict(sim))


def detection_to_doc(sc: DetectionScenario, **extra):
    doc = {
        "schema": DETECTION,
        "name": sc.name,
        "source": asdict(sc.source),
        "source_power": sc.source_power,
        "modulation": asdict(sc.modulation),
        "geometry": {**asdict(sc.geometry), "aperture": list(sc.geometry.aperture)},
        "stack": stack_to_doc(sc.stack),
        "detector": detector_to_doc(sc.detector),
        "amplifier": asdict(sc.amplifier) if sc.amplifier else None,
        "temperature": sc.temperature,
        "lockin_noise": asdict(sc.lockin_noise),
        "simulation": dict(sc.simulation),
    }
    doc.update(extra)
    return doc


# ------------------------------------------------------------------ entanglement


def parse_node(d, path):
    return _simple(d, path, EmitterNode)


def parse_link(doc, path=""):
    _check_keys(doc, ("schema", "name", "description", "node_a", "node_b", "attempt_rate", "protocol",
                      "herald_prefactor", "geometry", "baseline", "sweep", "seed", "monte_carlo_attempts"), path)
    geometry = doc.get("geometry")
    nodes = {}
    for key in ("node_a", "node_b"):
        nd = dict(_get(doc, key, path, dict))
        if geometry is not None and "coupling_efficiency" not in nd:
            from .entanglement import coupling_from_geometry
            gp = _join(path, "geometry")
            _check_keys(geometry, ("solid_angle_fraction", "stack_loss"), gp)
            nd["coupling_efficiency"] = coupling_from_geometry(_get(geometry, "solid_angle_fraction", gp),
                                                               _get(geometry, "stack_loss", gp))
        nodes[key] = parse_node(nd, _join(path, key))
    link = _build(path, EntanglementLink, node_a=nodes["node_a"], node_b=nodes["node_b"],
                  attempt_rate=_get(doc, "attempt_rate", path),
                  protocol=_get(doc, "protocol", path, str, required=False, default="linear_herald"),
                  herald_prefactor=_get(doc, "herald_prefactor", path, required=False))
    baseline = None
    if doc.get("baseline") is not None:
        b = doc["baseline"]
        bp = _join(path, "baseline")
        if isinstance(b, str):
            baseline = parse_link(load_preset_doc(b, path=bp), bp)[0]
        else:
            baseline = parse_link(_get(doc, "baseline", path, dict), bp)[0]
    return link, baseline


def link_to_doc(link: EntanglementLink, name="", **extra):
    doc = {"schema": LINK, "name": name, "node_a": asdict(link.node_a), "node_b": asdict(link.node_b),
           "attempt_rate": link.attempt_rate, "protocol": link.protocol,
           "herald_prefactor": link.herald_prefactor}
    doc.update(extra)
    return doc


# ------------------------------------------------------------------ fidelity


def parse_fidelity(doc):
    _check_keys(doc, ("schema", "name", "description", "bright_rate", "dark_rate", "scatter_rate",
                      "total_efficiency", "detection_scenario", "target_fidelity", "integration_time",
                      "sweep", "seed"), "")
    dark = _get(doc, "dark_rate", "", required=False, default=1e3)
    if "bright_rate" in doc:
        bright = _get(doc, "bright_rate", "")
    elif "total_efficiency" in doc:
        bright = _get(doc, "scatter_rate", "", required=False, default=1e7) * _get(doc, "total_efficiency", "")
    elif "detection_scenario" in doc:
        ref = doc["detection_scenario"]
        sc_doc = load_preset_doc(ref, path="detection_scenario") if isinstance(ref, str) else ref
        sc = parse_detection(sc_doc)
        bright = sc.source.scatter_rate_per_ion * total_detection_efficiency(sc)
    else:
        raise SchemaError("bright_rate", "need bright_rate, total_efficiency or detection_scenario")
    target = _get(doc, "target_fidelity", "", required=False, default=0.99)
    if not 0.5 < target < 1:
        raise SchemaError("target_fidelity", "must lie in (0.5, 1)")
    t = _get(doc, "integration_time", "", required=False)
    if t is not None and t < 0:
        raise SchemaError("integration_time", "must be non-negative")
    if bright < 0 or dark < 0:
        raise SchemaError("bright_rate" if bright < 0 else "dark_rate", "must be non-negative")
    return {"bright_rate": bright, "dark_rate": dark, "target_fidelity": target, "integration_time": t}


def total_detection_efficiency(sc: DetectionScenario) -> float:
    """Collection efficiency times detector QE: detected counts per emitted photon."""
    from .detection import detector_qe, solid_angle_fraction, stack_transmission
    return (solid_angle_fraction(sc.geometry) * stack_transmission(sc.stack)
            * detector_qe(sc.detector, sc.temperature, sc.source.wavelength))


# ------------------------------------------------------------------ dispatch


PARSERS = {TRAP: parse_trap, DETECTION: parse_detection, LINK: parse_link, FIDELITY: parse_fidelity}


def schema_of(doc) -> str:
    if not isinstance(doc, dict):
        raise SchemaError("<root>", "scenario must be a JSON object")
    tag = _get(doc, "schema", "", str)
    if tag not in SCHEMAS:
        raise SchemaError("schema", f"unrecognised schema tag {tag!r}")
    return tag


def parse(doc):
    """Parse any scenario document; returns (schema tag, parsed object)."""
    tag = schema_of(doc)
    if "sweep" in doc:
        parse_sweep(doc["sweep"])
    return tag, PARSERS[tag](doc)


def parse_sweep(d, path="sweep"):
    if not isinstance(d, dict):
        raise SchemaError(path, "expected an object")
    _check_keys(d, ("parameter", "start", "stop", "steps", "values"), path)
    param = _get(d, "parameter", path, str)
    if not param:
        raise SchemaError(_join(path, "parameter"), "empty parameter path")
    if "values" in d:
        vals = _get(d, "values", path, list)
        if not vals:
            raise SchemaError(_join(path, "values"), "empty sweep range")
        return param, list(vals)
    start = _get(d, "start", path)
    stop = _get(d, "stop", path)
    steps = _get(d, "steps", path, int)
    if steps < 1:
        raise SchemaError(_join(path, "steps"), "empty sweep range (steps must be >= 1)")
    if steps > 1 and start == stop:
        raise SchemaError(_join(path, "stop"), "empty sweep range (start == stop)")
    if steps == 1:
        return param, [d["start"]]
    vals = [start + (stop - start) * i / (steps - 1) for i in range(steps)]
    if all(isinstance(d[k], int) and not isinstance(d[k], bool) for k in ("start", "stop")) \
            and all(v.is_integer() for v in vals):
        vals = [int(v) for v in vals]
    return param, vals


def set_path(doc, dotted: str, value):
    """Copy of ``doc`` with the dotted path (list indices allowed) set to ``value``."""
    out = copy.deepcopy(doc)
    parts = dotted.split(".")
    node = out
    for i, part in enumerate(parts[:-1]):
        key = int(part) if part.isdigit() and isinstance(node, list) else part
        try:
            node = node[key]
        except (KeyError, IndexError, TypeError):
            raise SchemaError("sweep.parameter", f"path {'.'.join(parts[:i + 1])!r} not found") from None
    last = parts[-1]
    key = int(last) if last.isdigit() and isinstance(node, list) else last
    if isinstance(node, dict):
        if key not in node:
            raise SchemaError("sweep.parameter", f"path {dotted!r} not found")
        old = node[key]
    elif isinstance(node, list) and isinstance(key, int) and key < len(node):
        old = node[key]
    else:
        raise SchemaError("sweep.parameter", f"path {dotted!r} not found")
    if isinstance(old, int) and not isinstance(old, bool) and isinstance(value, float) and value.is_integer():
        value = int(value)
    node[key] = value
    return out


# ------------------------------------------------------------------ presets


def preset_dirs():
    dirs = []
    env = os.environ.get(PRESET_ENV)
    if env:
        dirs.append(Path(env))
    dirs.append(Path(str(resources.files("iontrap") / "presets")))
    return dirs


def list_presets():
    names = set()
    for d in preset_dirs():
        if d.is_dir():
            names.update(p.stem for p in d.glob("*.json"))
    return sorted(names)


def load_preset_doc(name: str, path: str = "--preset"):
    for d in preset_dirs():
        f = d / f"{name}.json"
        if f.is_file():
            return load_doc(f)
    raise SchemaError(path, f"unknown preset {name!r} (known: {', '.join(list_presets())})")


def load_doc(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError("<root>", f"invalid JSON: {exc}") from None
    except OSError as exc:
        raise SchemaError("--scenario", str(exc)) from None


def serialize(tag, parsed, doc=None):
    """Re-emit a parsed scenario as a document (inverse of :func:`parse`)."""
    extra = {}
    if doc:
        for k in ("description", "sweep", "seed", "monte_carlo_attempts"):
            if k in doc:
                extra[k] = doc[k]
    if tag == DETECTION:
        return detection_to_doc(parsed, **extra)
    if tag == LINK:
        link, base = parsed
        out = link_to_doc(link, doc.get("name", "") if doc else "", **extra)
        if base is not None:
            out["baseline"] = link_to_doc(base)
            del out["baseline"]["schema"]
        return out
    if tag == TRAP:
        out = {"schema": TRAP, "name": doc.get("name", "") if doc else ""}
        if parsed["layout"] is not None:
            out = layout_to_doc(parsed["layout"], out["name"])
        if parsed["template"] is not None:
            out["template"] = template_to_doc(parsed["template"])
        out["targets"] = targets_to_doc(parsed["targets"])
        if parsed["initial_guess"] is not None:
            out["initial_guess"] = list(parsed["initial_guess"])
        if parsed["film_stack"] is not None:
            out["film_stack"] = stack_to_doc(parsed["film_stack"])
        out.update(extra)
        return out
    if tag == FIDELITY:
        out = {"schema": FIDELITY, "name": doc.get("name", "") if doc else "",
               "bright_rate": parsed["bright_rate"], "dark_rate": parsed["dark_rate"],
               "target_fidelity": parsed["target_fidelity"], "integration_time": parsed["integration_time"]}
        out.update(extra)
        return out
    raise SchemaError("schema", f"unrecognised schema tag {tag!r}")
