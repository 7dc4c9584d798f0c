"""Refinement studies: run a scenario at several resolutions and tabulate rates.

Both studies compare final-time positions of every body against a reference
run.  Space studies sample all runs at the nodes of the coarsest lattice, the
only node set shared by every level.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .diagnostics import ConvergenceReport, convergence_rates, injection_map
from .errors import NumericalError, ScenarioError
from .scenario import Scenario, build_bodies, build_simulation, with_spacing, with_time

__all__ = [
    "StudyError",
    "check_halving",
    "final_positions",
    "time_study",
    "space_study",
    "write_report",
]

_REL = 1e-9


class StudyError(NumericalError):
    """A refinement run failed; ``partial`` holds the rows finished so far."""

    def __init__(self, message, partial=()):
        super().__init__(message)
        self.partial = list(partial)


def check_halving(values, what="values"):
    vals = [float(v) for v in values]
    if len(vals) < 2:
        raise ValueError(f"need at least two {what}")
    for a, b in zip(vals, vals[1:]):
        if not (b > 0 and abs(a / b - 2.0) <= _REL * 2):
            raise ValueError(f"{what} must halve at every step, got {a!r} then {b!r}")
    return vals


def final_positions(scenario: Scenario, dt=None, steps=None):
    """Positions of every body after ``steps`` levels (default: the scenario's)."""
    sim = build_simulation(scenario, dt=dt)
    sim.run(scenario.time.steps if steps is None else steps)
    return sim.x


def _error(xa, xb, maps=None):
    total = 0.0
    for k, (a, b) in enumerate(zip(xa, xb)):
        if maps is not None:
            a, b = a[maps[0][k]], b[maps[1][k]]
        total += float(np.sum((a - b) ** 2))
    return math.sqrt(total)


def _run_all(runs, ref_run, compare, label, out):
    """Run the reference, then each level; save partial rows on failure."""
    rows = []
    try:
        ref = ref_run()
        for param, run in runs:
            rows.append((param, compare(run(), ref)))
    except NumericalError as exc:
        if out is not None:
            _write_rows(out, rows)
        at = runs[len(rows)][0] if len(rows) < len(runs) else "reference"
        raise StudyError(f"{label} run at {at!r} failed: {exc}", rows) from exc
    return rows


def _write_rows(path, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["parameter,l2_error,rate"] + [f"{p!r},{e!r}," for p, e in rows]
    path.write_text("\n".join(lines) + "\n")


def time_study(scenario: Scenario, dts, ref: float, horizon=None, out=None) -> ConvergenceReport:
    """Vary the step size at fixed mesh; errors at the common final time."""
    dts = check_halving(dts, "time steps")
    ref = float(ref)
    if not ref < min(dts):
        raise ValueError("reference step must be smaller than every study step")
    horizon = scenario.horizon if horizon is None else float(horizon)
    levels = [with_time(scenario, dt, horizon) for dt in dts]
    ref_s = with_time(scenario, ref, horizon)
    runs = [(dt, lambda s=s: final_positions(s)) for dt, s in zip(dts, levels)]
    rows = _run_all(runs, lambda: final_positions(ref_s), _error, "time", out)
    report = convergence_rates([e for _, e in rows], dts)
    if out is not None:
        write_report(out, report)
    return report


def space_study(scenario: Scenario, spacings, ref: float, dt=None, horizon=None, out=None) -> ConvergenceReport:
    """Vary the lattice spacing at fixed step; errors on the coarsest lattice nodes."""
    spacings = check_halving(spacings, "spacings")
    ref = float(ref)
    ratio = spacings[-1] / ref
    if not (ratio > 1 and abs(ratio - round(ratio)) <= _REL * ratio):
        raise ValueError("reference spacing must refine the finest study spacing by an integer factor")
    base = with_time(scenario, dt, horizon)
    try:
        levels = [with_spacing(base, ds) for ds in spacings]
        ref_s = with_spacing(base, ref)
    except ScenarioError as exc:
        raise ValueError(str(exc)) from None
    coarse = [b.mesh for b in build_bodies(levels[0])]
    ref_meshes = [b.mesh for b in build_bodies(ref_s)]
    ref_map = [injection_map(c, f) for c, f in zip(coarse, ref_meshes)]

    def level_run(s):
        meshes = [b.mesh for b in build_bodies(s)]
        maps = [injection_map(c, f) for c, f in zip(coarse, meshes)]
        return maps, final_positions(s)

    def compare(level, ref_x):
        maps, x = level
        return _error(x, ref_x, (maps, ref_map))

    runs = [(ds, lambda s=s: level_run(s)) for ds, s in zip(spacings, levels)]
    rows = _run_all(runs, lambda: final_positions(ref_s), compare, "space", out)
    report = convergence_rates([e for _, e in rows], spacings)
    if out is not None:
        write_report(out, report)
    return report


def write_report(path, report: ConvergenceReport) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.to_csv())
    return path

