"""Command-line surface: constants, validate, run, sweep.

Exit codes: 0 pass, 1 check failure, 2 config error, 3 numerical setup
failure, 4 nonlinear solver failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import diagnostics
from .config import (
    ConfigError,
    hypotheses_from_config,
    load_config,
    scenario_from_config,
)
from .constants import ConvergenceError, SetupError, validate_hypotheses
from .dynamics import NonlinearSolveFailure, Trajectory, prepare, simulate, write_trajectory_csv
from .svgplot import line_plot

EXIT_OK = 0
EXIT_CHECK_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_SETUP_FAILURE = 3
EXIT_SOLVER_FAILURE = 4

ALL_CHECKS = ("well", "equivalence", "dissipation", "bound")

_FORMULAS = {
    "rho": "coupling exponent",
    "dim": "space dimension",
    "R": "max |x - x0| over mesh vertices",
    "m0": "min (x - x0) . nu over damped-facet quadrature points",
    "lambda1": "smallest lambda with K x = lambda M x",
    "c0": "best |v|_Lp(domain) / |v|_V, p = 2(rho+1), times safety",
    "c1": "best |v|_L4(domain) / |v|_V, times safety",
    "c2": "best |w|_L4(damped bdry) / |w|_V, times safety",
    "c3": "best |w|_L2(damped bdry) / |w|_V, times safety",
    "N": "c0^(2(rho+1)) / (2(rho+1))",
    "lambda_star": "(1/(4N))^(1/(2 rho))",
    "N1": "(c1^4/2)(n + 1/4) + R c2^4/2 + c1^4 (n-1)",
    "lambda1_star": "(1/(4 N1))^(1/2)",
    "P": "4 (2R + (n-1)/2 + (n-1)/(2 lambda1))",
    "D": "R^3 + R + R^2 (n-1)^2 c3^2",
    "tau": "min(1/(2P), m0/D)",
    "safety": "inflation applied to c0..c3",
}


def _to_jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _to_jsonable(v) for k, v in vars(obj).items() if not k.startswith("_")}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _write_manifest(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_to_jsonable(payload), indent=2, sort_keys=True) + "\n")


def cmd_constants(cfg: dict[str, str]) -> int:
    scenario = scenario_from_config(cfg)
    report = validate_hypotheses(*hypotheses_from_config(cfg))
    if not report.valid:
        print("\n".join(report.lines()))
        print("hypothesis check failed; constants not computed", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    prep = prepare(scenario)
    wc = prep.constants
    print(f"{'name':14s} {'value':>24s}  formula")
    for name in ("rho", "dim", "R", "m0", "lambda1", "c0", "c1", "c2", "c3",
                 "N", "lambda_star", "N1", "lambda1_star", "P", "D", "tau",
                 "safety"):
        val = getattr(wc, name)
        print(f"{name:14s} {val:>24.16g}  {_FORMULAS[name]}")
    print()
    for line in diagnostics.report_lines(wc, {"admissibility": prep.admissibility}):
        print(line)
    return EXIT_OK


def cmd_validate(cfg: dict[str, str]) -> int:
    report = validate_hypotheses(*hypotheses_from_config(cfg))
    print("\n".join(report.lines()))
    return EXIT_OK if report.valid else EXIT_CHECK_FAILURE


def _run_checks(trajectory: Trajectory, prep, selected) -> dict:
    results: dict = {}
    wc = prep.constants
    if "well" in selected:
        results["well"] = diagnostics.well_monitor(trajectory, wc)
    if "equivalence" in selected:
        results["equivalence"] = diagnostics.check_equivalence(trajectory, wc)
    if "dissipation" in selected:
        results["dissipation"] = diagnostics.check_dissipation(
            trajectory, prep.operators, wc.m0)
    if "bound" in selected:
        results["decay"] = diagnostics.check_decay_bound(trajectory, wc)
    return results


def _checks_passed(results: dict) -> bool:
    flags = []
    if "well" in results:
        flags.append(results["well"].invariant_held)
    if "equivalence" in results:
        flags.append(results["equivalence"].ok)
    if "dissipation" in results:
        flags.append(results["dissipation"].ok)
    if "decay" in results:
        flags.append(results["decay"].bound_satisfied)
    return all(flags)


def _plot(trajectory: Trajectory, wc, path: Path) -> None:
    times = trajectory.times()
    energies = trajectory.energies()
    floor = 1e-300
    log_e = [math.log10(max(e, floor)) for e in energies]
    series = [(times.tolist(), log_e, "log10 E(t)")]
    e0 = energies[0]
    if e0 > 0:
        rate = wc.tau / 3.0
        bound = [math.log10(3.0 * e0) - rate * t / math.log(10.0) for t in times]
        series.append((times.tolist(), bound, "log10 bound"))
    line_plot(path, series, title="energy decay", xlabel="t", ylabel="log10 E")


def _execute_run(cfg: dict[str, str], out_dir: Path, checks, no_plot: bool) -> tuple[int, dict]:
    """Shared by run and sweep; returns (exit code, summary fields)."""
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "manifest.json"
    scenario = scenario_from_config(cfg)
    manifest = {
        "scenario": scenario.name,
        "status": "running",
        "exit_code": None,
        "config": dict(sorted(cfg.items())),
        "outputs": [],
    }
    _write_manifest(manifest_path, manifest)
    summary: dict = {}
    try:
        prep = prepare(scenario)
        manifest["constants"] = prep.constants
        manifest["admissibility"] = prep.admissibility
        manifest["admissible"] = prep.admissibility.admissible
        trajectory = simulate(prep)
    except NonlinearSolveFailure as exc:
        manifest.update(status="solver_failure", exit_code=EXIT_SOLVER_FAILURE,
                        error=str(exc), failing_time=exc.time)
        _write_manifest(manifest_path, manifest)
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER_FAILURE, summary
    except (SetupError, ConvergenceError) as exc:
        manifest.update(status="setup_failure", exit_code=EXIT_SETUP_FAILURE,
                        error=str(exc))
        _write_manifest(manifest_path, manifest)
        print(f"numerical setup failure: {exc}", file=sys.stderr)
        return EXIT_SETUP_FAILURE, summary

    csv_path = out_dir / "trajectory.csv"
    write_trajectory_csv(trajectory, csv_path)
    outputs = [csv_path.name]

    results = _run_checks(trajectory, prep, checks)
    passed = _checks_passed(results)
    wc = prep.constants

    report_txt = out_dir / "report.txt"
    report_txt.write_text(
        diagnostics.render_report(wc, results, header=f"run: {scenario.name}") + "\n")
    outputs.append(report_txt.name)
    report_kv = out_dir / "report.kv"
    report_kv.write_text(
        "\n".join(diagnostics.report_lines(
            wc, {**results, "admissibility": prep.admissibility})) + "\n")
    outputs.append(report_kv.name)
    if not no_plot:
        svg_path = out_dir / "energy.svg"
        _plot(trajectory, wc, svg_path)
        outputs.append(svg_path.name)

    code = EXIT_OK if passed else EXIT_CHECK_FAILURE
    manifest.update(
        status="pass" if passed else "check_failure",
        exit_code=code,
        outputs=outputs,
        checks=results,
    )
    _write_manifest(manifest_path, manifest)
    print(report_txt.read_text(), end="")

    decay = results.get("decay")
    well = results.get("well")
    summary = {
        "E0": trajectory.energies()[0],
        "fitted_rate": decay.fitted_rate if decay else math.nan,
        "invariant_held": well.invariant_held if well else True,
        "bound_satisfied": decay.bound_satisfied if decay else True,
    }
    return code, summary


def cmd_run(cfg: dict[str, str], out: str, checks, no_plot: bool) -> int:
    code, _ = _execute_run(cfg, Path(out), checks, no_plot)
    return code


def cmd_sweep(cfg: dict[str, str], out: str, parameter: str, values, checks,
              no_plot: bool) -> int:
    if not values:
        print("sweep needs a non-empty value list", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    from .config import _KNOWN_KEYS
    if parameter not in _KNOWN_KEYS:
        print(f"unknown sweep parameter '{parameter}'", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    worst = EXIT_OK
    for value in values:
        sub_cfg = dict(cfg)
        sub_cfg[parameter] = value
        tag = f"{parameter.replace('.', '_')}_{value}"
        code, summary = _execute_run(sub_cfg, out_dir / tag, checks, no_plot)
        worst = max(worst, code)
        rows.append((value, summary))
    summary_path = out_dir / "sweep_summary.csv"
    with open(summary_path, "w") as fh:
        fh.write("value,E0,fitted_rate,invariant_held,bound_satisfied\n")
        for value, s in rows:
            fh.write(",".join([
                str(value),
                f"{s.get('E0', math.nan):.17g}",
                f"{s.get('fitted_rate', math.nan):.17g}",
                "true" if s.get("invariant_held", False) else "false",
                "true" if s.get("bound_satisfied", False) else "false",
            ]) + "\n")
    print(f"sweep summary written to {summary_path}")
    return worst


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="kgwell",
        description="coupled wave system with boundary damping: constants, "
                    "simulation, and decay verification",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, with_out=True):
        p.add_argument("--config", required=True, help="flat key=value config file")
        if with_out:
            p.add_argument("--out", default="out", help="output directory")
            p.add_argument("--no-plot", action="store_true", help="skip the SVG plot")
            p.add_argument("--check", default=",".join(ALL_CHECKS),
                           help="comma list from: " + ",".join(ALL_CHECKS))

    common(sub.add_parser("constants", help="print the constants table"), with_out=False)
    common(sub.add_parser("validate", help="check the exponent/dimension hypotheses"),
           with_out=False)
    common(sub.add_parser("run", help="simulate and verify one scenario"))
    sweep = sub.add_parser("sweep", help="run a scenario per parameter value")
    common(sweep)
    sweep.add_argument("--param", required=True, help="dotted config key to vary")
    sweep.add_argument("--values", required=True,
                       help="comma-separated values for the swept key")
    return ap


def _parse_checks(raw: str):
    checks = tuple(tok.strip() for tok in raw.split(",") if tok.strip())
    for c in checks:
        if c not in ALL_CHECKS:
            raise ConfigError(f"unknown check '{c}'; valid: {', '.join(ALL_CHECKS)}")
    return checks


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "constants":
            return cmd_constants(cfg)
        if args.command == "validate":
            return cmd_validate(cfg)
        checks = _parse_checks(args.check)
        if args.command == "run":
            return cmd_run(cfg, args.out, checks, args.no_plot)
        values = [tok.strip() for tok in args.values.split(",") if tok.strip()]
        return cmd_sweep(cfg, args.out, args.param, values, checks, args.no_plot)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (SetupError, ConvergenceError) as exc:
        print(f"numerical setup failure: {exc}", file=sys.stderr)
        return EXIT_SETUP_FAILURE
    except NonlinearSolveFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER_FAILURE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
