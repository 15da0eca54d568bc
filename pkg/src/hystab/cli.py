"""Command-line front end: ``hystab simulate | analyze | sweep | energy-audit``.

Exit codes: 0 ok, 2 bad configuration, 3 bad model, 4 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__, svg
from .energy import operator_ledger, supply_rate, write_energy_csv
from .errors import ConfigError, HystabError, InconsistentInitialState, ModelError
from .hysteresis import trace
from .lti import frequency_response, poles
from .scenarios import PRESETS, build_preset
from .simulate import (Integrator, Scenario, random_initial_states,
                       run, run_batch, write_trajectory_csv)
from .stability import equilibrium, feedback_sector, transformed_loop_check

EXIT_CONFIG, EXIT_MODEL, EXIT_USAGE = 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_flags(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--out", default=argparse.SUPPRESS if suppress else ".",
                   help="output directory (default: current directory)")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS if suppress else 0,
                   help="base seed for random initial states")
    p.add_argument("--dt", type=float, default=d, help="step size override")
    p.add_argument("--t-end", type=float, default=d, help="horizon override")
    p.add_argument("--format", choices=("csv", "json"),
                   default=argparse.SUPPRESS if suppress else "csv",
                   help="table format for written series")


def _scenario_flags(p):
    g = p.add_argument_group("scenario")
    g.add_argument("--config", help="scenario JSON file (or a run manifest)")
    g.add_argument("--preset", choices=sorted(PRESETS), help="built-in example")
    g.add_argument("--K", type=float, help="oscillator cross coupling")
    g.add_argument("--g", type=float, help="oscillator spring stiffness")
    g.add_argument("--h", type=float, help="hysteresis half-height")
    g.add_argument("--gamma", type=float, help="hysteresis slope")
    g.add_argument("--c", type=float, help="stop element stiffness")
    g.add_argument("--feedback", choices=("sign", "stop", "static", "none"),
                   help="feedback operator")
    g.add_argument("--damping-sign", choices=("as_printed", "dissipative"))
    g.add_argument("--coupling-sign", choices=("as_printed", "dissipative"))
    g.add_argument("--x0", help="comma-separated initial state")
    g.add_argument("--solver", choices=("rk4_fixed", "euler_fixed"))
    g.add_argument("--branch", choices=("auto", "delayed", "implicit"))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hystab", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    _scenario_flags(common)

    p = sub.add_parser("simulate", parents=[common], help="integrate a scenario")
    p.add_argument("--seeds", type=int, help="run N random initial states")
    p.add_argument("--box", type=float, default=3.0, help="half-width of the x0 box")
    p.add_argument("--stride", type=int, default=1, help="write every N-th sample")
    p.add_argument("--svg", action="store_true", help="also write SVG plots")
    p.add_argument("--axes", default="1,2", help="phase-portrait states, e.g. 1,2")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)

    p = sub.add_parser("analyze", parents=[common],
                       help="poles, equilibria and circle-criterion verdicts")
    p.add_argument("--grid", type=int, default=2000, help="frequency points")
    p.add_argument("--svg", action="store_true", help="also write SVG plots")

    p = sub.add_parser("sweep", parents=[common], help="vary one parameter")
    p.add_argument("--param", required=True, choices=("K", "h", "gamma"))
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--no-sim", action="store_true", help="only compute poles")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)

    p = sub.add_parser("energy-audit", parents=[common],
                       help="energy balance of the feedback operator along a run")
    p.add_argument("--tol", type=float, default=1e-8)

    parser.epilog = "commands:\n" + "".join(
        "  " + sp.format_usage().replace("usage: ", "") for sp in sub.choices.values())
    return parser


def load_scenario(args) -> Scenario:
    if args.config and args.preset:
        raise UsageError("give either --config or --preset, not both")
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}") from None
        if not text.strip():
            raise ConfigError(f"{args.config} is empty")
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {args.config}: {exc}") from None
        if isinstance(d, dict) and "scenario" in d:
            d = d["scenario"]
        scen = Scenario.from_dict(d)
    elif args.preset:
        overrides = {"K": args.K, "g": args.g, "h": args.h, "gamma": args.gamma,
                     "c": args.c, "damping_sign": args.damping_sign,
                     "coupling_sign": args.coupling_sign}
        if args.feedback:
            overrides["feedback_kind"] = args.feedback
        if args.preset != "oscillator":
            overrides.pop("c")
        elif args.gamma is not None:
            raise UsageError("the oscillator preset has no gamma parameter")
        scen = build_preset(args.preset, **overrides)
    else:
        raise UsageError("one of --config or --preset is required")
    changes = {}
    if args.dt is not None:
        changes["dt"] = args.dt
    if args.t_end is not None:
        changes["t_end"] = args.t_end
    if args.x0:
        try:
            changes["x0"] = [float(v) for v in args.x0.split(",")]
        except ValueError:
            raise ConfigError(f"bad --x0 {args.x0!r}") from None
    if args.solver:
        changes["solver"] = args.solver
    if args.branch:
        changes["branch"] = args.branch
    return scen.with_(**changes) if changes else scen


def scenario_hash(scen: Scenario) -> str:
    blob = json.dumps(scen.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False, default=_jsonable)
        fh.write("\n")


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    raise TypeError(f"not JSON serializable: {type(v).__name__}")


def _clean(obj):
    """Replace non-finite floats so the output is strict JSON."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def _write_series(path_stem, traj, fmt, stride):
    if fmt == "json":
        path = path_stem + ".json"
        cols = {"t": traj.t, "y": traj.y, "xi": traj.xi, "u": traj.u,
                "V": traj.V, "dissipated": traj.dissipated}
        for i in range(traj.x.shape[1]):
            cols[f"x{i + 1}"] = traj.x[:, i]
        _write_json(path, {k: v[::stride].tolist() for k, v in cols.items()})
    else:
        path = path_stem + ".csv"
        write_trajectory_csv(path, traj, stride)
    return path


def cmd_simulate(args) -> int:
    scen = load_scenario(args)
    if args.stride < 1:
        raise UsageError("--stride must be at least 1")
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    outputs = []
    if args.seeds:
        if args.seeds < 1:
            raise UsageError("--seeds must be positive")
        xs = random_initial_states(args.seeds, args.box, scen.sys.n, args.seed)
        batch = [scen.with_(x0=x, seed=args.seed, name=f"{scen.name}-{i:03d}")
                 for i, x in enumerate(xs)]
        results = run_batch(batch, workers=args.workers)
        rows = []
        for i, (s, (traj, diag)) in enumerate(zip(batch, results)):
            outputs.append(_write_series(os.path.join(args.out, f"run_{i:03d}"),
                                         traj, args.format, args.stride))
            rows.append({"index": i, "x0": s.x0.tolist(), "final": traj.x[-1].tolist(),
                         **diag.to_dict()})
        verdicts = [r["set_verdict"] for r in rows if r["set_verdict"] is not None]
        summary = {
            "runs": len(rows), "seed": args.seed, "box": args.box,
            "bounded_rate": sum(r["bounded"] for r in rows) / len(rows),
            "set_membership_rate": (sum(verdicts) / len(verdicts)) if verdicts else None,
            "invariant_set": scen.invariant_set, "results": rows,
        }
        path = os.path.join(args.out, "summary.json")
        _write_json(path, _clean(summary))
        outputs.append(path)
        print(f"{len(rows)} runs, bounded {summary['bounded_rate']:.0%}, "
              f"set membership {summary['set_membership_rate']}")
    else:
        traj, diag = run(scen)
        outputs.append(_write_series(os.path.join(args.out, "trajectory"), traj,
                                     args.format, args.stride))
        path = os.path.join(args.out, "diagnostics.json")
        _write_json(path, _clean(diag.to_dict()))
        outputs.append(path)
        if args.svg:
            try:
                i, j = (int(v) - 1 for v in args.axes.split(","))
            except ValueError:
                raise UsageError(f"bad --axes {args.axes!r}") from None
            if not (0 <= i < scen.sys.n and 0 <= j < scen.sys.n):
                raise UsageError("--axes out of range")
            for name, fn in (("phase.svg", lambda p: svg.phase_portrait(p, traj, i, j)),
                             ("loop.svg", lambda p: svg.hysteresis_loop(p, traj))):
                fn(os.path.join(args.out, name))
                outputs.append(os.path.join(args.out, name))
        lc = diag.limit_cycle
        print(f"{scen.name}: bounded={diag.bounded} "
              f"period={None if lc is None else round(lc.period, 6)} "
              f"growth={diag.growth_rate:.4g} set={diag.final_set_membership}")
    manifest = {
        "scenario_hash": scenario_hash(scen), "scenario": scen.to_dict(),
        "seed": args.seed, "seeds": args.seeds,
        "solver": {"solver": scen.solver, "dt": scen.dt, "t_end": scen.t_end,
                   "branch": Integrator(scen).branch},
        "version": __version__, "outputs": outputs,
        "wall_clock_s": time.perf_counter() - t0,
    }
    _write_json(os.path.join(args.out, "manifest.json"), _clean(manifest))
    return 0


def analysis_report(scen: Scenario, grid: int = 2000) -> dict:
    rep = poles(scen.sys)
    fb = scen.feedback
    h = fb.h if fb.kind in ("sign", "stop") else 0.0
    check = transformed_loop_check(scen.sys, feedback_sector(fb), h, (1e-3, 1e3, grid))
    return {
        "poles": [[float(p.real), float(p.imag)] for p in rep.poles],
        "max_real": rep.max_real, "v": rep.v, "marginal": rep.marginal,
        "classification": rep.classification,
        "equilibrium": equilibrium(scen.sys, fb).to_dict(),
        "phi_g": check["phi_g"].to_dict(), "phi_h": check["phi_h"].to_dict(),
        "overall": check["overall"],
    }


def cmd_analyze(args) -> int:
    scen = load_scenario(args)
    if args.grid < 2:
        raise UsageError("--grid must be at least 2")
    os.makedirs(args.out, exist_ok=True)
    report = analysis_report(scen, args.grid)
    _write_json(os.path.join(args.out, "report.json"), _clean(report))
    if args.svg:
        grid = (1e-3, 1e3, args.grid)
        svg.nyquist(os.path.join(args.out, "nyquist_G.svg"),
                    frequency_response(scen.sys, grid, "G"))
        svg.nyquist(os.path.join(args.out, "nyquist_sG.svg"),
                    frequency_response(scen.sys, grid, "sG"))
        svg.pole_map(os.path.join(args.out, "poles.svg"), poles(scen.sys).poles)
    print(f"{scen.name}: {report['classification']} (max Re {report['max_real']:.4g}), "
          f"phi_g {report['phi_g']['status']}, phi_h {report['phi_h']['status']}, "
          f"overall {report['overall']}")
    return 0


def sweep_values(start, stop, step):
    if not step > 0 or stop < start:
        raise UsageError("empty sweep range")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(n)]


def cmd_sweep(args) -> int:
    values = sweep_values(args.start, args.stop, args.step)
    base = args.preset
    scens = []
    for v in values:
        setattr(args, args.param, v)
        scens.append(load_scenario(args))
    if base is None and args.config:
        raise UsageError("sweep needs --preset (parameters are preset arguments)")
    results = [None] * len(scens) if args.no_sim else run_batch(scens, args.workers)
    os.makedirs(args.out, exist_ok=True)
    header = [args.param, "max_real", "bounded", "amplitude", "period", "growth_rate"]
    rows = []
    for v, s, res in zip(values, scens, results):
        row = {args.param: v, "max_real": poles(s.sys).max_real,
               "bounded": None, "amplitude": None, "period": None, "growth_rate": None}
        if res is not None:
            _, diag = res
            lc = diag.limit_cycle
            row.update(bounded=diag.bounded, growth_rate=diag.growth_rate,
                       amplitude=None if lc is None else float(lc.amplitude[0]),
                       period=None if lc is None else lc.period)
        rows.append(row)
    if args.format == "json":
        _write_json(os.path.join(args.out, "sweep.json"), _clean(rows))
    else:
        with open(os.path.join(args.out, "sweep.csv"), "w") as fh:
            fh.write(",".join(header) + "\n")
            for r in rows:
                fh.write(",".join(_cell(r[k]) for k in header) + "\n")
    for r in rows:
        print(" ".join(f"{k}={_cell(r[k])}" for k in header))
    return 0


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(float(v))


def cmd_energy_audit(args) -> int:
    scen = load_scenario(args)
    os.makedirs(args.out, exist_ok=True)
    traj, _ = run(scen)
    op0 = Integrator(scen).initial_operator()
    led = traj.ledger
    w = supply_rate(np.gradient(traj.y, traj.t), traj.xi) if len(traj.t) > 1 \
        else np.zeros(1)
    write_energy_csv(os.path.join(args.out, "energy.csv"), traj.t, traj.y, traj.xi,
                     w, led.stored, led.dissipated)
    # exact operator path, with jumps and saturation corners inserted
    py, pxi, _ = trace(op0, traj.y)
    replay = operator_ledger(op0, traj.y)
    residual = float(np.max(np.abs(replay.residual)))
    steps = np.diff(replay.dissipated)
    audit = {
        "feedback": scen.feedback.kind,
        "supplied": float(replay.supplied[-1]),
        "stored_change": float(replay.stored[-1] - replay.stored[0]),
        "dissipated": float(replay.dissipated[-1]),
        "max_residual": residual, "scale": replay.scale,
        "min_dissipation_step": float(steps.min()) if steps.size else 0.0,
        "path_points": int(py.size),
        "passed": bool(residual <= args.tol * replay.scale
                       and (steps.size == 0 or steps.min() >= -args.tol * replay.scale)),
    }
    _write_json(os.path.join(args.out, "energy_audit.json"), _clean(audit))
    print(f"supplied={audit['supplied']:.6g} dissipated={audit['dissipated']:.6g} "
          f"residual={residual:.3g} passed={audit['passed']}")
    return 0 if audit["passed"] else 1


COMMANDS = {"simulate": cmd_simulate, "analyze": cmd_analyze, "sweep": cmd_sweep,
            "energy-audit": cmd_energy_audit}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"hystab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelError as exc:
        print(f"hystab: model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (ConfigError, InconsistentInitialState, HystabError, ValueError) as exc:
        print(f"hystab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
