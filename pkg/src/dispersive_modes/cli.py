"""Command-line front end.

Exit codes: 0 success, 2 invalid input or scenario, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .artifacts import csv_text, field_csv, manifest_text, write_outputs
from .dispersion import DispersionError, build_table
from .equation import OperatorError
from .evolution import (
    EvolutionError,
    calibrate_source_coefficient,
    classical_dalembert,
    dalembert_general_x,
    rk4_steps,
    simulate,
    standard_wave_speed,
)
from .expressions import ExpressionError
from .grid import SpatialField, SpectralField, forward_values, l2_norm
from .modes import JetField, extract_modes
from .oracle import OracleOverflow, OracleReport, QuadratureError, dft_direct, idft_direct, refinement_study, rk4_reference
from .scenario import Scenario, ScenarioError, load_scenario, validate_scenario

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
METHODS = ("spectral", "dalembert-general", "dalembert-classical", "oracle")


class UsageError(ValueError):
    pass


def _say(args, msg):
    if not args.quiet:
        print(msg, file=sys.stderr)


def _parse_overrides(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--tolerance expects KEY=VAL, got {item!r}")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise UsageError(f"--tolerance {key}: {value!r} is not a number") from None
    return out


def _load(args) -> Scenario:
    s = load_scenario(args.scenario)
    overrides = _parse_overrides(args.tolerance)
    if overrides:
        try:
            tol = s.tolerances.with_overrides(overrides)
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from None
        s = replace(s, tolerances=tol)
    diags = validate_scenario(s)
    for d in diags:
        if d.severity == "warning":
            _say(args, str(d))
    errors = [d for d in diags if d.severity == "error"]
    if errors:
        raise ScenarioError("; ".join(f"{d.message}" for d in errors), errors[0].pointer)
    return s


def _time_tag(i: int) -> str:
    return f"t{i:04d}"


def _calibration(s: Scenario):
    if standard_wave_speed(s.operator) is None:
        return {"applicable": False, "reason": "operator is not a standard wave a*u_xx + b*u_tt"}
    return {"applicable": True, **calibrate_source_coefficient(s.operator)}


def _base_manifest(s: Scenario, table, command: str) -> dict:
    return {
        "command": command,
        "scenario": s.name,
        "scenario_sha256": s.digest,
        "version": __version__,
        "operator": s.operator.render(),
        "tolerances": s.tolerances.as_dict(),
        "branches": table.labels(),
        "branch_seeds": table.describe_branches(),
        "grid": {"n": s.grid.n, "length": s.grid.length},
        "initial_time": s.initial_time,
        "source_duration": s.source.duration if s.source is not None else None,
    }


# ---------------------------------------------------------------- subcommands


def cmd_simulate(args) -> int:
    s = _load(args)
    result = simulate(s)
    files, entries = {}, []
    for i, snap in enumerate(result.snapshots):
        tag = _time_tag(i)
        files[f"u_{tag}.csv"] = field_csv("x", "u", s.grid.x, snap.u.values)
        files[f"S_{tag}.csv"] = field_csv("k", "S", s.grid.k, snap.S.values)
        entries.append({"time": snap.time, "regime": snap.regime, "u": f"u_{tag}.csv", "S": f"S_{tag}.csv"})
    manifest = _base_manifest(s, result.table, "simulate")
    manifest.update(
        files=entries,
        wrap_horizon=result.horizon,
        valid_until=s.initial_time + result.horizon,
        calibration=_calibration(s),
    )
    files["manifest.json"] = manifest_text(manifest)
    write_outputs(args.out, files)
    _say(args, f"wrote {len(entries)} output time(s) to {args.out}")
    return EXIT_OK


def cmd_decompose(args) -> int:
    s = _load(args)
    table = build_table(s.operator, s.grid, s.tolerances)
    jet = JetField(s.grid, s.initial_jet_values(), s.initial_time)
    modes = extract_modes(jet, table)
    files = {"wave.csv": field_csv("k", "S", s.grid.k, jet.values[0])}
    listing = {"wave": "wave.csv", "modes": [], "after": [], "delta": []}
    for ell, row in enumerate(modes.values, start=1):
        files[f"mode_{ell}.csv"] = field_csv("k", f"S_{ell}", s.grid.k, row)
        listing["modes"].append(f"mode_{ell}.csv")
    if s.source is not None:
        result = simulate(replace(s, output_times=(0.0,)), table=table)
        after = extract_modes(result.particular.phi, table)
        for ell, (a_row, d_row) in enumerate(zip(after.values, result.delta_modes.values), start=1):
            files[f"after_{ell}.csv"] = field_csv("k", f"S_{ell}", s.grid.k, a_row)
            files[f"delta_{ell}.csv"] = field_csv("k", f"dS_{ell}", s.grid.k, d_row)
            listing["after"].append(f"after_{ell}.csv")
            listing["delta"].append(f"delta_{ell}.csv")
    manifest = _base_manifest(s, table, "decompose")
    manifest.update(files=listing, degenerate_k=[float(k) for k in s.grid.k[table.degenerate_bins]])
    files["manifest.json"] = manifest_text(manifest)
    write_outputs(args.out, files)
    _say(args, f"wrote {table.n_modes} mode file(s) to {args.out}")
    return EXIT_OK


def _valid_dalembert_times(s: Scenario, times):
    start = 0.0 if s.source is not None else s.initial_time
    return [t for t in times if t >= start]


def _classical_fields(s: Scenario, times) -> dict:
    c = standard_wave_speed(s.operator)
    if c is None:
        raise UsageError("the classical d'Alembert formula needs a standard wave operator a*u_xx + b*u_tt")
    fns = s.initial_functions
    if len(fns) < 2 or fns[0] is None or fns[1] is None:
        raise UsageError("the classical d'Alembert formula needs analytic expressions for u and dudt")
    if s.source is not None and s.source.kind != "analytic-expression":
        raise UsageError("the classical d'Alembert formula needs an analytic source expression")
    t0 = s.initial_time
    coefficient = calibrate_source_coefficient(s.operator)["coefficient"] if s.source is not None else 0.0
    out = {}
    for t in times:
        out[t] = classical_dalembert(
            lambda x: fns[0](x, t0),
            lambda x: fns[1](x, t0),
            s.source,
            c,
            s.grid.x,
            t,
            coefficient,
            t0=t0,
            window=s.source.window if s.source is not None else None,
        )
    return out


def _general_fields(s: Scenario, table, times) -> dict:
    initial = [SpatialField(s.grid, v, s.initial_time) for v in s.initial[:2]]
    return {t: dalembert_general_x(initial, s.source, s.operator, s.grid, t, table, s.tolerances).values for t in times}


def _oracle_fields(s: Scenario, table, times) -> dict:
    grid = s.grid
    jet0 = s.initial_jet_values()
    out = {}
    for t in times:
        if s.source is None or t <= s.initial_time:
            span = t - s.initial_time
            steps = max(8, 2 * rk4_steps(table, abs(span), s.tolerances))
            _, states = rk4_reference(s.operator, jet0, grid.k, (s.initial_time, t), steps)
        else:
            mid = min(t, 0.0)
            steps = max(8, 2 * rk4_steps(table, mid - s.initial_time, s.tolerances))
            _, states = rk4_reference(
                s.operator, jet0, grid.k, (s.initial_time, mid), steps,
                source=s.source, grid=grid, source_window=s.source.window,
            )
            if t > 0:
                steps = max(8, 2 * rk4_steps(table, t, s.tolerances))
                _, states = rk4_reference(s.operator, states[-1], grid.k, (0.0, t), steps)
        out[t] = idft_direct(SpectralField(grid, states[-1][0], t)).values
    return out


def _fields(method: str, s: Scenario, table, times) -> dict:
    if method == "spectral":
        result = simulate(replace(s, output_times=tuple(times)), table=table)
        return {snap.time: snap.u.values for snap in result.snapshots}
    if method == "dalembert-general":
        return _general_fields(s, table, times)
    if method == "dalembert-classical":
        return _classical_fields(s, times)
    if method == "oracle":
        return _oracle_fields(s, table, times)
    raise UsageError(f"unknown method {method!r}")


def cmd_dalembert(args) -> int:
    s = _load(args)
    if s.n_modes != 2:
        raise UsageError(f"the d'Alembert solution needs a two-mode operator, this one has {s.n_modes}")
    table = build_table(s.operator, s.grid, s.tolerances)
    times = _valid_dalembert_times(s, s.output_times)
    skipped = [t for t in s.output_times if t not in times]
    if not times:
        raise UsageError("no output time is at or after the end of the source window")
    for t in skipped:
        _say(args, f"warning: skipping t={t:g} (inside or before the source window)")
    method = "dalembert-classical" if args.classical else "dalembert-general"
    fields = _fields(method, s, table, times)
    files, entries = {}, []
    for i, t in enumerate(times):
        tag = _time_tag(i)
        files[f"u_{tag}.csv"] = field_csv("x", "u", s.grid.x, fields[t])
        entries.append({"time": t, "u": f"u_{tag}.csv"})
    manifest = _base_manifest(s, table, "dalembert")
    manifest.update(method=method, files=entries, skipped_times=skipped)
    if args.classical:
        manifest["calibration"] = _calibration(s)
    files["manifest.json"] = manifest_text(manifest)
    write_outputs(args.out, files)
    _say(args, f"wrote {len(entries)} output time(s) to {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    s = _load(args)
    table = build_table(s.operator, s.grid, s.tolerances)
    times = list(s.output_times)
    if any(m.startswith("dalembert") for m in (args.a, args.b)):
        if s.n_modes != 2:
            raise UsageError(f"the d'Alembert solution needs a two-mode operator, this one has {s.n_modes}")
        times = _valid_dalembert_times(s, times)
    if not times:
        raise UsageError("no output time is valid for both methods")
    fa = _fields(args.a, s, table, times)
    fb = _fields(args.b, s, table, times)
    l2 = [l2_norm(s.grid, fa[t] - fb[t], "x") for t in times]
    linf = [float(np.max(np.abs(fa[t] - fb[t]))) for t in times]
    files = {"compare.csv": csv_text(["time", "l2", "linf"], [times, l2, linf])}
    manifest = _base_manifest(s, table, "compare")
    manifest.update(methods=[args.a, args.b], files=["compare.csv"], max_linf=max(linf))
    if "dalembert-classical" in (args.a, args.b):
        manifest["calibration"] = _calibration(s)
    files["manifest.json"] = manifest_text(manifest)
    write_outputs(args.out, files)
    if not args.quiet:
        for t, e2, ei in zip(times, l2, linf):
            print(f"t={t:<10g} l2={e2:.3e} linf={ei:.3e}")
    return EXIT_OK


def cmd_dispersion(args) -> int:
    s = _load(args)
    table = build_table(s.operator, s.grid, s.tolerances)
    header, cols = ["k"], [s.grid.k]
    for ell, row in enumerate(table.branches, start=1):
        header += [f"re_omega_{ell}", f"im_omega_{ell}"]
        cols += [row.real, row.imag]
    text = csv_text(header, cols)
    if args.out is None:
        sys.stdout.write(text)
    else:
        manifest = _base_manifest(s, table, "dispersion")
        manifest.update(files=["dispersion.csv"], degenerate_k=[float(k) for k in s.grid.k[table.degenerate_bins]])
        write_outputs(args.out, {"dispersion.csv": text, "manifest.json": manifest_text(manifest)})
    return EXIT_OK


def cmd_oracle(args) -> int:
    s = _load(args)
    table = build_table(s.operator, s.grid, s.tolerances)
    if args.check == "dft":
        u = SpatialField(s.grid, s.initial[0], s.initial_time)
        fast = forward_values(s.grid, u.values)
        err = float(np.max(np.abs(fast - dft_direct(u).values)) / max(np.max(np.abs(fast)), 1e-300))
        report = OracleReport("forward", "dft_direct", [s.grid.n], [err])
    elif args.check == "spectral":
        times = list(s.output_times)
        fa = _fields("spectral", s, table, times)
        fb = _fields("oracle", s, table, times)
        errs = [float(np.max(np.abs(fa[t] - fb[t]))) for t in times]
        report = OracleReport("spectral", "rk4_reference", [s.grid.n], errs, notes=f"times={times}")
    else:  # rk4-order: self-convergence of the oracle integrator at the fastest bin
        j = int(np.argmax(np.max(np.abs(table.branches), axis=0)))
        k = s.grid.k[j : j + 1]
        jet0 = np.ones((table.n_modes, 1), dtype=complex)
        span = min(1.0, max(abs(t - s.initial_time) for t in s.output_times) or 1.0)
        base = max(8, int(math.ceil(np.max(np.abs(table.branches[:, j])) * span / 0.4)))
        res = [base, 2 * base, 4 * base]

        def run(steps):
            return rk4_reference(s.operator, jet0, k, (0.0, span), steps)[1][-1]

        report = refinement_study(run, res, "rk4_reference", theoretical_order=4.0)
    print(json.dumps(report.as_dict(), sort_keys=True, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dispersive-modes", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario", help="scenario JSON path or bundled preset name")
    common.add_argument("--tolerance", action="append", metavar="KEY=VAL", help="override a numerical tolerance")
    common.add_argument("--quiet", action="store_true", help="suppress progress and warnings on stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("simulate", parents=[common], help="evolve the scenario and write field CSVs + manifest")
    p.add_argument("-o", "--out", required=True, metavar="DIR")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("decompose", parents=[common], help="write per-mode spectra at the initial time")
    p.add_argument("-o", "--out", required=True, metavar="DIR")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("dalembert", parents=[common], help="evaluate the generalized (or classical) d'Alembert solution")
    p.add_argument("-o", "--out", required=True, metavar="DIR")
    p.add_argument("--classical", action="store_true", help="use the classical whole-line formula (standard wave only)")
    p.set_defaults(func=cmd_dalembert)

    p = sub.add_parser("compare", parents=[common], help="run two methods and write an error table")
    p.add_argument("-o", "--out", required=True, metavar="DIR")
    p.add_argument("--a", required=True, choices=METHODS)
    p.add_argument("--b", required=True, choices=METHODS)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("dispersion", parents=[common], help="write the branch table as CSV (stdout without -o)")
    p.add_argument("-o", "--out", metavar="DIR")
    p.set_defaults(func=cmd_dispersion)

    p = sub.add_parser("oracle", parents=[common])  # developer check, left out of the command list
    p.add_argument("--check", choices=("dft", "spectral", "rk4-order"), default="spectral")
    p.set_defaults(func=cmd_oracle)
    sub._choices_actions = [a for a in sub._choices_actions if a.dest != "oracle"]
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, UsageError, ExpressionError, OperatorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (DispersionError, EvolutionError, QuadratureError, OracleOverflow, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
