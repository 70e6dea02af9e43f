"""Command-line front end.

Exit status: 0 on success, 2 for an invalid scenario (the error names the
field path), 3 when a solver or simulation fails. Errors are written to
stderr as a JSON object.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import scenarios as S
from .detection import (
    ConfigurationError,
    background_subtracted_mean,
    budget,
    histogram,
    pooled_std,
)
from .electrostatics.calibrate import CalibrationError, calibrate
from .electrostatics.solver import TrapError, solve
from .entanglement import comparison_report, entanglement_rate, rate_ratio, simulate_attempts
from .state_detection import (
    InfeasibleTargetError,
    NotDiscriminableError,
    fidelity_at_time,
    min_integration_time,
    optimal_threshold,
    CountModel,
)

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_SOLVER = 3


class SolverFailure(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


# ------------------------------------------------------------------ output


def _num(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if math.isnan(v) else v
    if isinstance(v, dict):
        return {k: _num(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_num(x) for x in v]
    return v


def to_json(doc) -> str:
    return json.dumps(_num(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return " ".join(_cell(x) for x in v)
    return str(v)


def to_csv(rows, columns=None) -> str:
    rows = list(rows)
    if columns is None:
        columns = []
        for r in rows:
            columns += [k for k in r if k not in columns]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def emit_histogram(samples, bin_width: float) -> str:
    """CSV (bin_center, count) of left-closed bins."""
    centres, counts = histogram(samples, bin_width)
    return to_csv(({"bin_center_V": c, "count": int(n)} for c, n in zip(centres, counts)),
                  ["bin_center_V", "count"])


def _envelope(tag, body):
    return {"schema": tag, "toolkit": "iontrap", "toolkit_version": __version__, **body}


class Output:
    def __init__(self, out_dir, fmt, stdout):
        self.dir = Path(out_dir) if out_dir else None
        self.fmt = fmt
        self.stdout = stdout
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def write(self, name, text):
        if self.dir is None:
            self.stdout.write(text)
            return
        with open(self.dir / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)

    def report(self, stem, tag, body, rows):
        if self.fmt == "json":
            self.write(f"{stem}.json", to_json(_envelope(tag, body)))
        else:
            self.write(f"{stem}.csv", to_csv(rows))


# ------------------------------------------------------------------ scenario loading


def load(args, expected):
    if bool(args.preset) == bool(args.scenario):
        raise S.SchemaError("--preset", "give exactly one of --preset or --scenario")
    doc = S.load_preset_doc(args.preset) if args.preset else S.load_doc(args.scenario)
    tag = S.schema_of(doc)
    if expected and tag not in expected:
        raise S.SchemaError("schema", f"expected {' or '.join(expected)}, got {tag!r}")
    if "sweep" in doc:
        S.parse_sweep(doc["sweep"])
    return doc, tag, S.PARSERS[tag](doc)


def seed_of(args, doc):
    if args.seed is not None:
        return args.seed
    if isinstance(doc.get("seed"), int) and not isinstance(doc.get("seed"), bool) and doc["seed"] >= 0:
        return doc["seed"]
    if "seed" in doc:
        raise S.SchemaError("seed", "expected a non-negative integer")
    raise S.SchemaError("seed", "a seed is required for stochastic runs (use --seed or a 'seed' field)")


# ------------------------------------------------------------------ row builders


def _trap_layout(parsed):
    if parsed["layout"] is not None:
        layout = parsed["layout"]
        guess = parsed["initial_guess"]
        if guess is None:
            raise S.SchemaError("initial_guess", "required when giving an explicit electrode list")
    else:
        layout = parsed["template"].layout()
        guess = parsed["initial_guess"] or (0.0, 0.0, parsed["template"].analytic_height())
    return layout, guess


def trap_solve_row(parsed):
    layout, guess = _trap_layout(parsed)
    try:
        sol = solve(layout, guess)
    except TrapError as exc:
        raise SolverFailure(str(exc), {"kind": type(exc).__name__, **exc.info}) from None
    d = sol.as_dict()
    row = {
        "ion_height_m": sol.minimum_position[2],
        "secular_frequency_1_Hz": sol.secular_frequencies[0],
        "secular_frequency_2_Hz": sol.secular_frequencies[1],
        "secular_frequency_3_Hz": sol.secular_frequencies[2],
        "trap_depth_eV": sol.trap_depth,
        "rf_only_depth_eV": sol.rf_only_depth,
        "mathieu_q": sol.mathieu_q,
        "escape_is_saddle": sol.escape_is_saddle,
    }
    return d, row


def detect_budget_row(sc):
    row = budget(sc)
    return row, row


def fidelity_row(q):
    b, d, target = q["bright_rate"], q["dark_rate"], q["target_fidelity"]
    try:
        t_min = min_integration_time(b, d, target)
        res = optimal_threshold(CountModel(b, d, t_min))
    except InfeasibleTargetError as exc:
        raise SolverFailure(str(exc), {"supremum_fidelity": exc.supremum_fidelity}) from None
    except NotDiscriminableError as exc:
        raise SolverFailure(str(exc), {"bright_rate": b, "dark_rate": d}) from None
    row = {"bright_rate_per_s": b, "dark_rate_per_s": d, "target_fidelity": target,
           "min_integration_time_s": t_min, "threshold_counts": res.threshold,
           "fidelity_at_min_time": res.fidelity}
    if q["integration_time"] is not None:
        row["integration_time_s"] = q["integration_time"]
        row["fidelity_at_integration_time"] = fidelity_at_time(b, d, q["integration_time"])
    return row, row


def entangle_row(parsed, doc, seed=None):
    link, base = parsed
    rep = entanglement_rate(link)
    body = {"name": doc.get("name", ""), "report": rep.as_dict()}
    row = {"name": doc.get("name", ""), "protocol": rep.protocol,
           "per_attempt_probability": rep.per_attempt_probability, "rate_per_s": rep.rate}
    if base is not None:
        cmp = comparison_report(link, base)
        ratio = rate_ratio(rep, entanglement_rate(base))
        body["report"]["ratio_to_baseline"] = ratio
        body["comparison"] = cmp
        row["ratio_to_baseline"] = ratio
        for proto, v in cmp["baseline"]["models"].items():
            row[f"baseline_{proto}_rate_per_s"] = v["rate_per_s"]
        row["baseline_quoted_rate_per_s"] = cmp["baseline"]["quoted_rate_per_s"]
        row["baseline_discrepancy"] = cmp["baseline"]["discrepancy"]
    if seed is not None:
        n = int(doc.get("monte_carlo_attempts", 10_000_000))
        hits, est, se = simulate_attempts(link, n, seed)
        body["monte_carlo"] = {"attempts": n, "successes": hits, "rate_per_s": est, "standard_error_per_s": se,
                               "seed": seed}
        row["monte_carlo_rate_per_s"] = est
        row["monte_carlo_standard_error_per_s"] = se
    return body, row


# ------------------------------------------------------------------ commands


def cmd_trap_solve(args, out):
    doc, tag, parsed = load(args, (S.TRAP,))
    body, row = trap_solve_row(parsed)
    out.report("trap_solution", tag, {"name": doc.get("name", ""), "solution": body}, [row])


def cmd_trap_calibrate(args, out):
    doc, tag, parsed = load(args, (S.TRAP,))
    if parsed["template"] is None:
        raise S.SchemaError("template", "calibration needs a five-wire template")
    try:
        rep = calibrate(parsed["template"], parsed["targets"])
    except CalibrationError as exc:
        raise SolverFailure(str(exc), exc.report.as_dict()) from None
    except TrapError as exc:
        raise SolverFailure(str(exc), {"kind": type(exc).__name__, **exc.info}) from None
    layout_doc = S.layout_to_doc(rep.template.layout(), doc.get("name", ""),
                                 template=S.template_to_doc(rep.template),
                                 targets=S.targets_to_doc(parsed["targets"]),
                                 initial_guess=list(rep.solution.minimum_position))
    body = {"name": doc.get("name", ""), "calibration": rep.as_dict(), "layout": layout_doc}
    if out.dir is not None:
        out.write("calibrated_layout.json", to_json(layout_doc))
    sol = rep.solution
    row = {"ion_height_m": sol.minimum_position[2], "trap_depth_eV": sol.trap_depth,
           **{f"secular_frequency_{i + 1}_Hz": f for i, f in enumerate(sol.secular_frequencies)},
           **{f"template_{k}": v for k, v in S.template_to_doc(rep.template).items() if k != "kind"}}
    out.report("calibration", tag, body, [row])


def cmd_detect_budget(args, out):
    doc, tag, sc = load(args, (S.DETECTION,))
    body, row = detect_budget_row(sc)
    out.report("budget", tag, {"name": sc.name, "budget": body}, [row])


def cmd_detect_lockin(args, out):
    doc, tag, sc = load(args, (S.DETECTION,))
    seed = seed_of(args, doc)
    try:
        diff, on, off = background_subtracted_mean(sc, seed)
    except ConfigurationError as exc:
        raise SolverFailure(str(exc)) from None
    bin_w = float(sc.simulation.get("histogram_bin_V", 0.01))
    for label, res in (("with_ions", on), ("without_ions", off)):
        k0 = int(np.searchsorted(res.time, res.settle_time))
        out.write(f"lockin_{label}.csv", to_csv(
            ({"time_s": t, "lockin_output_V": v} for t, v in zip(res.time, res.v_out)),
            ["time_s", "lockin_output_V"]))
        out.write(f"histogram_{label}.csv", emit_histogram(res.v_out[k0:], bin_w))
    summary = {"name": sc.name, "seed": seed, "mean_with_ions_V": on.mean, "std_with_ions_V": on.std,
               "mean_without_ions_V": off.mean, "std_without_ions_V": off.std,
               "background_subtracted_mean_V": diff,
               "pooled_std_V": pooled_std(on.v_out, off.v_out)}
    out.report("lockin_summary", tag, summary, [summary])


def cmd_fidelity_time(args, out):
    doc, tag, q = load(args, (S.FIDELITY,))
    body, row = fidelity_row(q)
    out.report("fidelity", tag, {"name": doc.get("name", ""), "result": body}, [row])


def cmd_entangle_rate(args, out):
    doc, tag, parsed = load(args, (S.LINK,))
    seed = args.seed if args.seed is not None else None
    if seed is None and args.monte_carlo:
        seed = seed_of(args, doc)
    body, row = entangle_row(parsed, doc, seed)
    out.report("entanglement_rate", tag, body, [row])


def _sweep_point(tag, doc):
    if tag == S.TRAP:
        return trap_solve_row(S.parse_trap(doc))[1]
    if tag == S.DETECTION:
        return detect_budget_row(S.parse_detection(doc))[1]
    if tag == S.FIDELITY:
        return fidelity_row(S.parse_fidelity(doc))[1]
    return entangle_row(S.parse_link(doc), doc)[1]


def cmd_sweep(args, out):
    doc, tag, _ = load(args, None)
    if "sweep" not in doc:
        raise S.SchemaError("sweep", "scenario has no sweep block")
    param, values = S.parse_sweep(doc["sweep"])
    rows = []
    for i, v in enumerate(values):
        point = S.set_path({k: x for k, x in doc.items() if k != "sweep"}, param, v)
        try:
            S.PARSERS[tag](point)
        except S.SchemaError as exc:
            raise S.SchemaError(exc.path, f"{exc.message} (sweep point {i}, {param}={v!r})") from None
        try:
            r = _sweep_point(tag, point)
            status = "ok"
        except SolverFailure as exc:
            r, status = {}, f"error: {exc}"
        rows.append({"index": i, param: v, "status": status, **r})
    body = {"name": doc.get("name", ""), "parameter": param, "rows": rows}
    out.report("sweep", tag, body, rows)


# ------------------------------------------------------------------ argparse


def build_parser():
    p = argparse.ArgumentParser(prog="iontrap", description="Transparent ion-trap detection toolkit")
    p.add_argument("--version", action="version", version=f"iontrap {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", help="named preset scenario")
    common.add_argument("--scenario", help="path to a JSON scenario file")
    common.add_argument("--seed", type=int, help="RNG seed (non-negative integer)")
    common.add_argument("--out", help="directory for output files (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    sub = p.add_subparsers(dest="group", required=True)
    trap = sub.add_parser("trap").add_subparsers(dest="action", required=True)
    trap.add_parser("solve", parents=[common]).set_defaults(func=cmd_trap_solve)
    trap.add_parser("calibrate", parents=[common]).set_defaults(func=cmd_trap_calibrate)
    det = sub.add_parser("detect").add_subparsers(dest="action", required=True)
    det.add_parser("budget", parents=[common]).set_defaults(func=cmd_detect_budget)
    det.add_parser("lockin", parents=[common]).set_defaults(func=cmd_detect_lockin)
    fid = sub.add_parser("fidelity").add_subparsers(dest="action", required=True)
    fid.add_parser("time", parents=[common]).set_defaults(func=cmd_fidelity_time)
    ent = sub.add_parser("entangle").add_subparsers(dest="action", required=True)
    rate = ent.add_parser("rate", parents=[common])
    rate.add_argument("--monte-carlo", action="store_true", help="also run the seeded attempt simulation")
    rate.set_defaults(func=cmd_entangle_rate)
    sub.add_parser("sweep", parents=[common]).set_defaults(func=cmd_sweep)
    sub.add_parser("presets", help="list available presets").set_defaults(func=None)
    return p


def _fail(stderr, code, kind, message, **extra):
    stderr.write(to_json({"error": kind, "message": message, "exit_status": code, **extra}))
    return code


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    if args.func is None:
        stdout.write("\n".join(S.list_presets()) + "\n")
        return EXIT_OK
    try:
        if args.seed is not None and args.seed < 0:
            raise S.SchemaError("--seed", "must be a non-negative integer")
        args.func(args, Output(args.out, args.format, stdout))
    except S.SchemaError as exc:
        return _fail(stderr, EXIT_SCHEMA, "schema", exc.message, path=exc.path)
    except SolverFailure as exc:
        return _fail(stderr, EXIT_SOLVER, "solver", str(exc), report=exc.report)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
