"""Command-line entry point.

Subcommands: fk, ik, plan, run, report, serve. Exit codes: 0 success,
1 domain failure (no IK solution, plan failed), 2 usage/parse errors.
Machine-readable output is behind ``--format records`` (one JSON object
per line); the default is human-readable text.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .chain import bundled_config_path, forward_kinematics, home, load_chain
from .dualarm import (DualSweepOptions, assemble_rig, plan_dual_sweep,
                      save_trajectory)
from .errors import IfindError, NotConverged, ParseError, PlanFailed
from .ik import IKOptions, solve_ik
from .session import build_report, format_report, load_session
from .sim import run_scenario
from .surface import generate_sweep, load_mesh, resample_sweep
from .transforms import Pose

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


def _vector(text: str, expected: int | None = None) -> np.ndarray:
    try:
        values = np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad numeric vector {text!r}") \
            from exc
    if expected is not None and len(values) != expected:
        raise argparse.ArgumentTypeError(
            f"expected {expected} comma-separated values, got {len(values)}")
    return values


def _mesh_path(name: str):
    if name.endswith(".off"):
        return name
    return bundled_config_path("meshes", f"{name}.off")


def _print_pose(pose: Pose, fmt: str):
    if fmt == "records":
        print(json.dumps({"position": [float(x) for x in pose.position],
                          "quaternion": [float(x)
                                         for x in pose.orientation]},
                         sort_keys=True))
    else:
        p = pose.position
        q = pose.orientation
        print(f"position: {p[0]:.9f} {p[1]:.9f} {p[2]:.9f}")
        print(f"quaternion: {q[0]:.9f} {q[1]:.9f} {q[2]:.9f} {q[3]:.9f}")


def cmd_fk(args) -> int:
    chain = load_chain(args.preset)
    q = _vector(args.q, len(chain))
    _print_pose(forward_kinematics(chain, q), args.format)
    return EXIT_OK


def cmd_ik(args) -> int:
    chain = load_chain(args.preset)
    seed = _vector(args.seed, len(chain)) if args.seed else home(chain)
    target = Pose(_vector(args.position, 3), _vector(args.quaternion, 4))
    try:
        q = solve_ik(chain, target, seed, IKOptions())
    except NotConverged as exc:
        print(f"no IK solution: position residual "
              f"{exc.position_residual:.3e} m, orientation residual "
              f"{exc.orientation_residual:.3e} rad", file=sys.stderr)
        return EXIT_DOMAIN
    if args.format == "records":
        print(json.dumps({"q": [float(v) for v in q]}, sort_keys=True))
    else:
        print("q: " + ",".join(f"{v:.9f}" for v in q))
    return EXIT_OK


def cmd_plan(args) -> int:
    mesh = load_mesh(_mesh_path(args.mesh))
    rig = assemble_rig(args.rig)
    left = resample_sweep(
        mesh, generate_sweep(mesh, _vector(args.left_start, 3),
                             _vector(args.left_end, 3), args.spacing,
                             args.indentation), args.count)
    right = resample_sweep(
        mesh, generate_sweep(mesh, _vector(args.right_start, 3),
                             _vector(args.right_end, 3), args.spacing,
                             args.indentation), args.count)
    try:
        trajectory = plan_dual_sweep(rig, left, right, args.margin,
                                     DualSweepOptions(margin=args.margin))
    except PlanFailed as exc:
        print(f"plan failed at waypoint {exc.waypoint_index}",
              file=sys.stderr)
        if args.out:
            save_trajectory(exc.partial_trajectory, args.out)
        return EXIT_DOMAIN
    if args.out:
        save_trajectory(trajectory, args.out)
    clearances = [p.min_clearance for p in trajectory]
    if args.format == "records":
        print(json.dumps({"waypoints": len(trajectory),
                          "min_clearance": min(clearances)}, sort_keys=True))
    else:
        print(f"planned {len(trajectory)} waypoints; "
              f"min clearance {min(clearances):.4f} m")
    return EXIT_OK


def cmd_run(args) -> int:
    log = run_scenario(args.scenario)
    from .session import save_session
    save_session(log, args.out)
    if args.format == "records":
        print(json.dumps({"events": len(log.events), "out": args.out},
                         sort_keys=True))
    else:
        print(f"wrote {len(log.events)} events to {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    log = load_session(args.log)
    report = build_report(log)
    if args.format == "records":
        print(json.dumps(report, sort_keys=True))
    else:
        sys.stdout.write(format_report(report))
    return EXIT_OK


def cmd_serve(args) -> int:
    import asyncio

    from .service import SimService, bundled_console_dir
    from .sim import SimConfig, Simulator, load_scenario, \
        simulator_from_scenario

    if args.scenario:
        node = load_scenario(args.scenario)
        sim, _, _ = simulator_from_scenario(node)
        if args.port == 8787 and "port" in node:
            args.port = int(node["port"])
    else:
        sim = Simulator(SimConfig(plant_name=args.preset, seed=args.seed))
    console = args.console or bundled_console_dir()
    service = SimService(sim, log_out=args.log_out, max_ticks=args.max_ticks,
                         console_dir=console)
    print(f"serving {sim.config.plant_name}: tcp://{args.host}:{args.port} "
          f"http://{args.host}:{args.port + 1}", file=sys.stderr)
    try:
        asyncio.run(service.serve(args.host, args.port))
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ifind-sim",
        description="Simulator for the iFIND robotic ultrasound systems")
    sub = parser.add_subparsers(dest="command", required=True)

    fk = sub.add_parser("fk", help="forward kinematics for a preset")
    fk.add_argument("--preset", required=True)
    fk.add_argument("--q", required=True,
                    help="comma-separated joint values (rad or m)")
    fk.add_argument("--format", choices=("text", "records"), default="text")
    fk.set_defaults(func=cmd_fk)

    ik = sub.add_parser("ik", help="inverse kinematics to a pose")
    ik.add_argument("--preset", required=True)
    ik.add_argument("--position", required=True, help="x,y,z in meters")
    ik.add_argument("--quaternion", required=True, help="w,x,y,z")
    ik.add_argument("--seed", default=None,
                    help="seed joint vector (defaults to home)")
    ik.add_argument("--format", choices=("text", "records"), default="text")
    ik.set_defaults(func=cmd_ik)

    plan = sub.add_parser("plan", help="plan a collision-free dual sweep")
    plan.add_argument("--mesh", required=True,
                      help="bundled mesh name or .off path")
    plan.add_argument("--rig", default="ifind-v3")
    plan.add_argument("--left-start", required=True)
    plan.add_argument("--left-end", required=True)
    plan.add_argument("--right-start", required=True)
    plan.add_argument("--right-end", required=True)
    plan.add_argument("--spacing", type=float, default=0.03)
    plan.add_argument("--count", type=int, default=10)
    plan.add_argument("--indentation", type=float, default=0.002)
    plan.add_argument("--margin", type=float, default=0.02)
    plan.add_argument("--out", default=None, help="trajectory output file")
    plan.add_argument("--format", choices=("text", "records"), default="text")
    plan.set_defaults(func=cmd_plan)

    run = sub.add_parser("run", help="run a scenario file headless")
    run.add_argument("--scenario", required=True)
    run.add_argument("--out", required=True, help="session log output file")
    run.add_argument("--format", choices=("text", "records"), default="text")
    run.set_defaults(func=cmd_run)

    report = sub.add_parser("report", help="summarize a session log")
    report.add_argument("--log", required=True)
    report.add_argument("--format", choices=("text", "records"),
                        default="text")
    report.set_defaults(func=cmd_report)

    serve = sub.add_parser("serve", help="serve the live simulation")
    serve.add_argument("--preset", default="ifind-v2")
    serve.add_argument("--scenario", default=None,
                       help="serve a scenario's simulator instead")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8787)
    serve.add_argument("--seed", type=int, default=0)
    serve.add_argument("--max-ticks", type=int, default=None)
    serve.add_argument("--log-out", default=None)
    serve.add_argument("--console", default=None,
                       help="directory with the operator-console bundle")
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, argparse.ArgumentTypeError, FileNotFoundError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IfindError as exc:
        if type(exc).__name__ in ("UnknownPreset", "InvalidConfig",
                                  "DegenerateMesh"):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
