"""Command-line driver.

Exit status: 0 on success, 1 on a numerical failure (inverted cell,
non-finite state, failed self check), 2 on usage or scenario errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import NumericalError, ScenarioError

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2


def _floats(tokens):
    out = []
    for tok in tokens:
        for part in tok.split(","):
            part = part.strip()
            if not part:
                continue
            try:
                out.append(float(part))
            except ValueError:
                raise argparse.ArgumentTypeError(f"not a number: {part!r}") from None
    return out


def _positive(text):
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not val > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return val


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="varfsi", description="Variational solid and fluid-structure simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and write frames and diagnostics")
    r.add_argument("scenario", help="scenario file or bundled scenario name")
    r.add_argument("--out", help="output directory (default: the scenario's output.directory)")
    r.add_argument("--steps", type=int, help="override the number of steps")
    r.add_argument("--quiet", action="store_true", help="only print errors")

    t = sub.add_parser("converge-time", help="time-step refinement study")
    t.add_argument("scenario")
    t.add_argument("--dts", nargs="+", required=True, help="halving list of steps, e.g. 2e-4,1e-4,5e-5")
    t.add_argument("--ref", type=_positive, required=True, help="reference step")
    t.add_argument("--horizon", type=_positive, help="final time (default: dt * steps of the scenario)")
    t.add_argument("--out", default="convergence_time.csv", help="report CSV path")

    s = sub.add_parser("converge-space", help="lattice refinement study")
    s.add_argument("scenario")
    s.add_argument("--ds", nargs="+", required=True, help="halving list of spacings, e.g. 0.1,0.05,0.025")
    s.add_argument("--ref", type=_positive, required=True, help="reference spacing")
    s.add_argument("--dt", type=_positive, help="time step (default: the scenario's)")
    s.add_argument("--horizon", type=_positive, help="final time (default: dt * steps of the scenario)")
    s.add_argument("--out", default="convergence_space.csv", help="report CSV path")

    v = sub.add_parser("verify", help="run built-in self checks, one JSON line per check")
    v.add_argument("suite", nargs="?", default="all",
                   choices=["all", "kinematics", "materials", "gradients", "noether"])
    return p


def _cmd_run(args) -> int:
    from .output import run_scenario
    from .scenario import load_scenario

    scen = load_scenario(args.scenario)
    out = Path(args.out if args.out else scen.output.directory)
    if args.steps is not None and args.steps < 1:
        raise ScenarioError("--steps must be at least 1")
    res = run_scenario(scen, out_dir=out, steps=args.steps, record=True)
    if not args.quiet:
        last = res.rows[-1]
        print(f"completed {res.simulation.step_index} steps, t = {res.simulation.time:.6g} s")
        print(f"relative energy {last['relative_energy']:+.3e}, min contact gap {last['min_psi']:.3e}")
        print(f"output in {out}")
    return EXIT_OK


def _cmd_converge(args, kind) -> int:
    from .harness import space_study, time_study
    from .scenario import load_scenario

    scen = load_scenario(args.scenario)
    try:
        if kind == "time":
            report = time_study(scen, _floats(args.dts), args.ref, horizon=args.horizon, out=args.out)
        else:
            report = space_study(scen, _floats(args.ds), args.ref, dt=args.dt, horizon=args.horizon, out=args.out)
    except (ValueError, argparse.ArgumentTypeError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        print(f"varfsi: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(report.summary())
    print(f"report written to {args.out}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .verify import run_suite

    checks = run_suite(args.suite)
    for c in checks:
        print(c.to_json())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_NUMERICAL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "converge-time":
            return _cmd_converge(args, "time")
        if args.command == "converge-space":
            return _cmd_converge(args, "space")
        return _cmd_verify(args)
    except ScenarioError as exc:
        print(f"varfsi: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"varfsi: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"varfsi: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
