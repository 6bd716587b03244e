"""Command-line front end.

Subcommands: ``critical``, ``schedule``, ``study``, ``simulate``.  Every flag
may also come from a flat ``key=value`` file given with ``--config``; flags
on the command line win.
"""
from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterable, Sequence

from . import drifting, improved, oracle
from .critical import all_critical_speeds, circular_critical_speed
from .scenario import (
    BelowCriticalError,
    InfeasiblePlanError,
    ProtocolKind,
    Scenario,
    ScenarioError,
    SpeedSpec,
    critical_speed,
    resolve_speed,
    validate_scenario,
)

SCHEMA_LINE = "# schema=1"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_TIMEOUT = 4

SCHEDULE_COLUMNS = ["index", "R_before", "R_after", "beta", "sweep_time", "inward_time", "center_y"]


class UsageError(Exception):
    pass


def fmt(value) -> str:
    """Fixed 6-significant-digit rendering so CSV output is byte-stable."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        text = f"{value:.6g}"
        return "0" if text == "-0" else text
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [SCHEMA_LINE, ",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def parse_range(text: str, name: str) -> list[float]:
    """``a:b:step`` inclusive of both ends; a bare number is a single point."""
    parts = text.split(":")
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"--{name}: expected a:b:step or a number, got {text!r}") from None
    if len(nums) == 1:
        return nums
    if len(nums) != 3:
        raise UsageError(f"--{name}: expected a:b:step, got {text!r}")
    a, b, step = nums
    if not step > 0:
        raise UsageError(f"--{name}: step must be positive, got {step:g}")
    if b < a:
        raise UsageError(f"--{name}: inverted range {a:g} > {b:g}")
    n = int(math.floor((b - a) / step + 1e-9)) + 1
    return [a + k * step for k in range(n)]


# --------------------------------------------------------------------------
# argument handling


def read_config(path: str) -> dict[str, str]:
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value, got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        values[key.lstrip("-").replace("-", "_")] = value
    return values


def _common(p: argparse.ArgumentParser, speed: bool = True) -> None:
    p.add_argument("--config", help="key=value file mirroring the flags")
    p.add_argument("--R0", type=float, help="initial evader-region radius")
    p.add_argument("--r", type=float, help="sensor half-length")
    p.add_argument("--VT", type=float, help="maximal evader speed")
    p.add_argument("--out", help="write output here instead of stdout")
    p.add_argument("--format", choices=["text", "csv"], default="text")
    if speed:
        p.add_argument("--protocol", default="drifting",
                       help="drifting, improved or circular (study: comma-separated list)")
        g = p.add_mutually_exclusive_group()
        g.add_argument("--Vs", type=float, help="absolute sweeper speed")
        g.add_argument("--deltaV", help="speed above the protocol's critical speed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spiralsweep", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("critical", help="print all critical speeds")
    _common(p, speed=False)

    p = sub.add_parser("schedule", help="per-iteration sweep schedule and end game")
    _common(p)

    p = sub.add_parser("study", help="parameter study as CSV")
    _common(p)
    p.add_argument("--alpha", help="R0/r range a:b:step (R0 = alpha*r)")
    p.add_argument("--above-circular", "--fig14", dest="above_circular", action="store_true",
                   help="run both spiral protocols deltaV above the circular critical speed")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")

    p = sub.add_parser("simulate", help="grid wavefront oracle run")
    _common(p)
    p.add_argument("--cell-size", dest="cell_size", type=float, help="default r/20")
    p.add_argument("--dt", type=float, help="default 0.9*cell_size/Vs")
    p.add_argument("--horizon", type=float, help="default 10*R0/VT")
    p.add_argument("--frames", help="directory for frame_%%06d.pgm snapshots")
    p.add_argument("--frame-every", dest="frame_every", type=int, default=50)
    return parser


def parse_args(argv: Sequence[str] | None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]  # noqa: SLF001
        known = {a.dest for a in sub._actions}  # noqa: SLF001
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        for a in sub._actions:  # noqa: SLF001
            if a.dest in cfg and isinstance(a, argparse._StoreTrueAction):  # noqa: SLF001
                cfg[a.dest] = cfg[a.dest].lower() in ("1", "true", "yes", "on")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def scenario_from(args) -> Scenario:
    missing = [f"--{k}" for k in ("R0", "r", "VT") if getattr(args, k) is None]
    if missing:
        raise UsageError("missing required flags: " + " ".join(missing))
    return validate_scenario(Scenario(float(args.R0), float(args.r), float(args.VT)))


def speed_from(args, s: Scenario, protocol: ProtocolKind) -> float:
    if args.Vs is not None:
        return resolve_speed(s, SpeedSpec.absolute(float(args.Vs)))
    if args.deltaV is None:
        raise UsageError("give --Vs or --deltaV")
    try:
        dv = float(args.deltaV)
    except ValueError:
        raise UsageError(f"--deltaV must be a number here, got {args.deltaV!r}") from None
    if not dv > 0:
        Vc = critical_speed(s, protocol)
        raise BelowCriticalError(
            f"deltaV={dv:g} does not put Vs above the {protocol.value} critical speed {Vc:.6g}",
            critical=Vc,
        )
    return resolve_speed(s, SpeedSpec.above_critical(protocol, dv))


def emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text, newline="\n")
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# subcommands


CRITICAL_LABELS = {
    "lower_bound": "lower bound",
    "improved_spiral": "improved spiral critical",
    "drifting_spiral": "drifting spiral critical",
    "circular": "circular critical",
}


def cmd_critical(args) -> int:
    s = scenario_from(args)
    speeds = all_critical_speeds(s)
    if args.format == "csv":
        emit(args, csv_text(list(speeds), [list(speeds.values())]))
    else:
        width = max(len(v) for v in CRITICAL_LABELS.values())
        emit(args, "".join(f"{CRITICAL_LABELS[k]:<{width}}  {fmt(v)}\n" for k, v in speeds.items()))
    return EXIT_OK


def _protocol(args, allow_circular: bool = False) -> ProtocolKind:
    p = ProtocolKind.parse(args.protocol)
    if p is ProtocolKind.CIRCULAR and not allow_circular:
        raise UsageError("the circular baseline only supports critical-speed queries")
    return p


def schedule_report(s: Scenario, Vs: float, protocol: ProtocolKind):
    """(iteration rows, footer pairs, feasible) for one run."""
    mod = drifting if protocol is ProtocolKind.DRIFTING else improved
    sched = mod.schedule(s, Vs)
    plan = mod.endgame(s, Vs, sched.containment_radius)
    rows = [
        [it.index, it.radius_before, it.radius_after, it.beta, it.sweep_time, it.inward_time,
         it.center_after[1]]
        for it in sched.iterations
    ]
    footer = [
        ("Vs", Vs),
        ("N", sched.iteration_count),
        ("R_N", sched.containment_radius),
        ("T_spiral", sched.spiral_time),
        ("T_in", sched.inward_time),
        ("T_containment", sched.containment_time),
    ]
    footer += list(plan.stage_times.items())
    footer += [(k, v) for k, v in plan.stage_distances.items() if k != "R_N"]
    footer += [("t", plan.linear_split[0]), ("t_tilde", plan.linear_split[1])]
    footer.append(("feasible", plan.feasible))
    footer.append(("T_total", sched.containment_time + plan.total_time if plan.feasible else math.nan))
    return rows, footer, plan


def cmd_schedule(args) -> int:
    s = scenario_from(args)
    protocol = _protocol(args)
    Vs = speed_from(args, s, protocol)
    rows, footer, plan = schedule_report(s, Vs, protocol)
    if args.format == "csv":
        text = csv_text(SCHEDULE_COLUMNS, rows)
        text += "quantity,value\n" + "".join(f"{k},{fmt(v)}\n" for k, v in footer)
    else:
        lines = ["  ".join(f"{c:>11}" for c in SCHEDULE_COLUMNS)]
        lines += ["  ".join(f"{fmt(v):>11}" for v in row) for row in rows]
        lines.append("")
        lines += [f"{k:<13} {fmt(v)}" for k, v in footer]
        text = "\n".join(lines) + "\n"
    emit(args, text)
    if not plan.feasible:
        print("end game infeasible: " + "; ".join(plan.violations), file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _study_point(s: Scenario, Vs: float, protocol: ProtocolKind) -> tuple[float, float, float]:
    """(N, containment time, total time); nan where the protocol does not apply."""
    mod = drifting if protocol is ProtocolKind.DRIFTING else improved
    try:
        sched = mod.schedule(s, Vs)
    except (BelowCriticalError, ScenarioError):
        return math.nan, math.nan, math.nan
    plan = mod.endgame(s, Vs, sched.containment_radius)
    total = sched.containment_time + plan.total_time if plan.feasible else math.nan
    return sched.iteration_count, sched.containment_time, total


def _study_row(job) -> list:
    key, s, protocols, dv, above_circular = job
    row = [key]
    for p in protocols:
        try:
            Vc = circular_critical_speed(s) if above_circular else critical_speed(s, p)
        except (ScenarioError, RuntimeError):
            row += [math.nan] * 4
            continue
        Vs = Vc + dv
        row += [Vs, *_study_point(s, Vs, p)]
    return row


def cmd_study(args) -> int:
    if args.alpha is None and args.deltaV is None:
        raise UsageError("study needs --alpha a:b:step or --deltaV a:b:step")
    if args.Vs is not None:
        raise UsageError("study takes speeds relative to a critical speed; use --deltaV")
    if args.above_circular:
        protocols = [ProtocolKind.IMPROVED, ProtocolKind.DRIFTING]
    else:
        protocols = [ProtocolKind.parse(p) for p in str(args.protocol).split(",")]
        if ProtocolKind.CIRCULAR in protocols:
            raise UsageError("the circular baseline has no schedule; use --above-circular for comparisons")
    if args.alpha is not None:
        if args.r is None or args.VT is None:
            raise UsageError("--alpha studies need --r and --VT")
        dvs = parse_range(args.deltaV, "deltaV") if args.deltaV is not None else [float(args.VT)]
        if len(dvs) != 1:
            raise UsageError("vary either --alpha or --deltaV, not both")
        alphas = parse_range(args.alpha, "alpha")
        key = "alpha"
        jobs = []
        for a in alphas:
            s = Scenario(a * args.r, args.r, args.VT)
            validate_scenario(s)
            jobs.append((a, s, protocols, dvs[0], args.above_circular))
    else:
        s = scenario_from(args)
        key = "deltaV"
        jobs = [(dv, s, protocols, dv, args.above_circular) for dv in parse_range(args.deltaV, "deltaV")]
    for job in jobs:
        if not job[3] > 0:
            raise UsageError("deltaV values must be positive")

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_study_row, jobs))  # map keeps input order
    else:
        rows = [_study_row(j) for j in jobs]
    header = [key]
    for p in protocols:
        header += [f"Vs_{p.value}", f"N_{p.value}", f"T_containment_{p.value}", f"T_total_{p.value}"]
    if args.format == "csv":
        emit(args, csv_text(header, rows))
    else:
        lines = ["  ".join(f"{c:>24}" for c in header)]
        lines += ["  ".join(f"{fmt(v):>24}" for v in row) for row in rows]
        emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    s = scenario_from(args)
    protocol = _protocol(args)
    Vs = speed_from(args, s, protocol)
    cell = args.cell_size if args.cell_size is not None else s.r / 20
    dt = args.dt if args.dt is not None else 0.9 * cell / Vs
    horizon = args.horizon if args.horizon is not None else 10 * s.R0 / s.VT
    if not Vs * dt < cell:
        raise UsageError(
            f"anti-tunneling: Vs*dt must be below cell_size; need dt < {cell / Vs:.6g}"
        )
    v = oracle.simulate(s, Vs, protocol, cell, dt, horizon,
                        frames_dir=args.frames, frame_every=args.frame_every)
    mod = drifting if protocol is ProtocolKind.DRIFTING else improved
    try:
        analytic = mod.total_time(s, Vs)[1]
    except (BelowCriticalError, InfeasiblePlanError, ScenarioError) as exc:
        analytic = math.nan
        note = str(exc)
    else:
        note = ""
    fields = [
        ("verdict", v.kind.value),
        ("protocol", protocol.value),
        ("Vs", Vs),
        ("cell_size", cell),
        ("dt", dt),
        ("time", v.time if v.time is not None else math.nan),
        ("witness_x", v.cell[0] if v.cell else math.nan),
        ("witness_y", v.cell[1] if v.cell else math.nan),
        ("occupied_cells", v.occupied_cells),
        ("steps", v.steps),
        ("analytic_total", analytic),
        ("relative_error",
         abs(v.time - analytic) / analytic if v.time is not None and math.isfinite(analytic) else math.nan),
    ]
    if args.format == "csv":
        emit(args, csv_text([k for k, _ in fields], [[val for _, val in fields]]))
    else:
        lines = [f"{k:<15} {fmt(val)}" for k, val in fields]
        if note:
            lines.append(f"{'analytic_note':<15} {note}")
        emit(args, "\n".join(lines) + "\n")
    if v.kind is oracle.VerdictKind.TIMED_OUT:
        return EXIT_TIMEOUT
    if v.kind is oracle.VerdictKind.ESCAPE_WITNESS:
        return EXIT_INFEASIBLE
    return EXIT_OK


COMMANDS = {
    "critical": cmd_critical,
    "schedule": cmd_schedule,
    "study": cmd_study,
    "simulate": cmd_simulate,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        build_parser().print_usage(sys.stderr)
        print(f"spiralsweep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse already printed usage
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        build_parser().print_usage(sys.stderr)
        print(f"spiralsweep {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioError as exc:
        print(f"spiralsweep {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BelowCriticalError, InfeasiblePlanError) as exc:
        print(f"spiralsweep {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
